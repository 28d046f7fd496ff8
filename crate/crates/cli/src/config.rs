use sarcd_core::classifier::HingeParams;
use sarcd_core::pcanet::PcaNetConfig;
use sarcd_core::sampling::Strategy;
use sarcd_core::{Error, Result};

/// Everything a training run needs apart from the input rasters.
#[derive(Debug, Clone, PartialEq)]
pub struct RunConfig {
    pub net: PcaNetConfig,
    /// Dilation radius of the boundary band.
    pub radius: usize,
    pub strategy: Strategy,
    /// Fraction of pixels drawn for training. The pseudo strategy uses it as the
    /// clustering confidence.
    pub rate: f64,
    /// Master seed; every random stream is derived from it.
    pub seed: u64,
    pub hinge: HingeParams,
    /// Added to both dates before the log-ratio used by the pseudo strategy.
    pub log_ratio_offset: f64,
    /// Detection threads; `None` uses the global pool.
    pub workers: Option<usize>,
}

impl Default for RunConfig {
    fn default() -> Self {
        RunConfig {
            net: PcaNetConfig::default(),
            radius: 2,
            strategy: Strategy::Obuc,
            rate: 0.05,
            seed: 0,
            hinge: HingeParams::default(),
            log_ratio_offset: 1.0,
            workers: None,
        }
    }
}

impl RunConfig {
    pub fn validate(&self) -> Result<()> {
        self.net.validate()?;
        self.hinge.validate()?;
        if self.strategy != Strategy::Generalize && !(self.rate > 0.0 && self.rate <= 1.0) {
            return Err(Error::Parameter(format!(
                "rate must lie in (0, 1], got {}",
                self.rate
            )));
        }
        if !(self.log_ratio_offset > 0.0 && self.log_ratio_offset.is_finite()) {
            return Err(Error::Parameter(format!(
                "log-ratio offset must be positive, got {}",
                self.log_ratio_offset
            )));
        }
        if self.workers == Some(0) {
            return Err(Error::Parameter("workers must be at least 1".into()));
        }
        Ok(())
    }
}
