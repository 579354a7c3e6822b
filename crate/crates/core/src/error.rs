use thiserror::Error;

/// Errors raised by basis construction, operator algebra and time evolution.
#[derive(Debug, Error)]
pub enum Error {
    #[error("basis size C({n}+{d}-1, {n}) overflows the index type")]
    BasisTooLarge { d: usize, n: usize },

    #[error("state {state:?} does not belong to the sector with {modes} modes and {particles} particles")]
    NotInSector {
        state: Vec<u32>,
        modes: usize,
        particles: usize,
    },

    #[error("index {index} out of range for a basis of size {len}")]
    IndexOutOfRange { index: usize, len: usize },

    #[error("mode index {mode} out of range (d = {modes})")]
    ModeOutOfRange { mode: usize, modes: usize },

    #[error("operator string is not number conserving: {creations} creations vs {annihilations} annihilations")]
    Unbalanced {
        creations: usize,
        annihilations: usize,
    },

    #[error("dimension mismatch: {context}")]
    DimensionMismatch { context: String },

    #[error("invalid permutation {0:?}")]
    InvalidPermutation(Vec<usize>),

    #[error("site {site} out of range for {sites} sites")]
    SiteOutOfRange { site: usize, sites: usize },

    #[error("size guard: {0}")]
    Guard(String),

    #[error("invalid model: {0}")]
    InvalidModel(String),

    #[error("operator is not Hermitian (max |A - A^dag| = {deviation:e})")]
    NotHermitian { deviation: f64 },

    #[error("initial state is not a valid density matrix: {0}")]
    InvalidState(String),

    #[error("invalid time grid: {0}")]
    InvalidTimeGrid(String),

    #[error("step size underflow at t = {t_fs} fs (h = {h:e}); the problem is likely stiff")]
    StepSizeUnderflow { t_fs: f64, h: f64 },

    #[error("non-finite value in the state at t = {t_fs} fs")]
    NonFinite { t_fs: f64 },

    #[error("maximum number of steps ({0}) exceeded")]
    TooManySteps(usize),

    #[error("cavity truncation leakage {leakage:e} exceeds threshold {threshold:e}; increase cavity_dim")]
    Leakage { leakage: f64, threshold: f64 },

    #[error("numerical check failed: {0}")]
    Numerical(String),

    #[error("config error{}: {message}", at_line(*.line))]
    Config { line: usize, message: String },

    #[error(transparent)]
    Io(#[from] std::io::Error),
}

fn at_line(line: usize) -> String {
    if line == 0 {
        String::new()
    } else {
        format!(" at line {line}")
    }
}

pub type Result<T> = std::result::Result<T, Error>;
