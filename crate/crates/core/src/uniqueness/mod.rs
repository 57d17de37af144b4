//! Uniqueness machinery: close-at-infinity matching, lumps and the bump
//! product harness.

pub mod harness;
pub mod lumps;
pub mod matching;

pub use harness::{
    dm_bound, far_field_check, psi, psi_factors, psi_zero_identity, FarFieldReport, FarFieldSample,
    HarnessConfig, PsiZeroCertificate,
};
pub use lumps::{lump_decompose, Lump, LumpDecomposition};
pub use matching::{match_close, MatchReport, MatchedPair, ShellEntry, TailEntry};
