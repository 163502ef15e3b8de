//! Metamorphic testing for quantum circuit toolchains.
//!
//! The crate generates random quantum programs, derives follow-up programs
//! through output-relating transformations, runs both on a bundled
//! toolchain (QASM import/export, gate-set translation, routing,
//! optimization, statevector simulation) and reports pairs whose outputs
//! violate the expected relation.
//!
//! | module         | role                                                     |
//! |----------------|----------------------------------------------------------|
//! | [`circuit`]    | circuit IR, gate catalog, programs and coupling maps     |
//! | [`generator`]  | seeded random source programs                            |
//! | [`transforms`] | the ten transformations and chain policy                 |
//! | [`qasm`]       | OpenQASM 2.0 export and import                           |
//! | [`backend`]    | the platform under test: compile pipeline and simulators |
//! | [`compare`]    | relation processing, KS test, verdicts                   |
//! | [`campaign`]   | the campaign loop, reports, clustering and replay        |
//! | [`defects`]    | plantable toolchain defects                              |
//!
//! The guide in `book/` walks through each stage; its code listings are
//! compiled and run as doctests of this crate.

pub mod backend;
pub mod campaign;
pub mod circuit;
pub mod compare;
pub mod defects;
pub mod generator;
pub mod linalg;
pub mod qasm;
pub mod transforms;

#[cfg(doctest)]
mod book {
    #[doc = include_str!("../../../book/src/introduction.md")]
    mod introduction {}
    #[doc = include_str!("../../../book/src/programs.md")]
    mod programs {}
    #[doc = include_str!("../../../book/src/platform.md")]
    mod platform {}
    #[doc = include_str!("../../../book/src/transformations.md")]
    mod transformations {}
    #[doc = include_str!("../../../book/src/comparing.md")]
    mod comparing {}
    #[doc = include_str!("../../../book/src/campaigns.md")]
    mod campaigns {}
    #[doc = include_str!("../../../book/src/cli.md")]
    mod cli {}
}
