pub mod evaluator;
pub mod experiment;
pub mod fhe;
pub mod optics;
pub mod qcore;
pub mod qotp;
pub mod rng;
pub mod stats;
pub mod tomo;
pub mod tpsc;

/// The guide's chapters, compiled so their snippets run as doc-tests.
#[cfg(doctest)]
pub mod book {
    #[doc = include_str!("../../../book/src/introduction.md")]
    pub mod introduction {}
    #[doc = include_str!("../../../book/src/pad.md")]
    pub mod pad {}
    #[doc = include_str!("../../../book/src/encrypted_bits.md")]
    pub mod encrypted_bits {}
    #[doc = include_str!("../../../book/src/evaluation.md")]
    pub mod evaluation {}
    #[doc = include_str!("../../../book/src/optics.md")]
    pub mod optics {}
    #[doc = include_str!("../../../book/src/tomography.md")]
    pub mod tomography {}
    #[doc = include_str!("../../../book/src/noise.md")]
    pub mod noise {}
    #[doc = include_str!("../../../book/src/comparison.md")]
    pub mod comparison {}
    #[doc = include_str!("../../../book/src/cli.md")]
    pub mod cli {}
}
