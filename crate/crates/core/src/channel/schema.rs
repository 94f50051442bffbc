//! Versioned JSON documents for link statistics and effective channels.

use serde::{Deserialize, Serialize};

use super::{ChannelStatistics, EffectiveChannel, LinkStatistics};
use crate::error::{Error, Result};
use crate::linalg::{mat_from_pairs, mat_to_pairs, vec_from_pairs, vec_to_pairs, Pair};
use crate::scalar::Real;

pub const SCHEMA_VERSION: u32 = 1;
const STATISTICS_SCHEMA: &str = "leo-rsma/channel-statistics";
const EFFECTIVE_SCHEMA: &str = "leo-rsma/effective-channel";

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct LinkDocument {
    pub beta: f64,
    pub kappa: f64,
    pub g: Vec<Pair>,
    pub d0: Vec<Pair>,
    pub sigma: Vec<Vec<Pair>>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct StatisticsDocument {
    pub schema: String,
    pub version: u32,
    pub num_sat_antennas: usize,
    pub num_ut_antennas: usize,
    /// `links[k][s]`.
    pub links: Vec<Vec<LinkDocument>>,
}

fn check_header(schema: &str, version: u32, expected: &str) -> Result<()> {
    if schema != expected {
        return Err(Error::invalid(format!(
            "expected schema {expected:?}, found {schema:?}"
        )));
    }
    if version != SCHEMA_VERSION {
        return Err(Error::invalid(format!("unsupported schema version {version}")));
    }
    Ok(())
}

impl StatisticsDocument {
    pub fn from_statistics<T: Real>(stats: &ChannelStatistics<T>) -> Self {
        StatisticsDocument {
            schema: STATISTICS_SCHEMA.into(),
            version: SCHEMA_VERSION,
            num_sat_antennas: stats.num_sat_antennas,
            num_ut_antennas: stats.num_ut_antennas,
            links: stats
                .links
                .iter()
                .map(|row| {
                    row.iter()
                        .map(|l| LinkDocument {
                            beta: l.beta.as_f64(),
                            kappa: l.kappa.as_f64(),
                            g: vec_to_pairs(&l.g),
                            d0: vec_to_pairs(&l.d0),
                            sigma: mat_to_pairs(&l.sigma),
                        })
                        .collect()
                })
                .collect(),
        }
    }

    pub fn to_statistics<T: Real>(&self) -> Result<ChannelStatistics<T>> {
        check_header(&self.schema, self.version, STATISTICS_SCHEMA)?;
        let links = self
            .links
            .iter()
            .map(|row| {
                row.iter()
                    .map(|l| {
                        Ok(LinkStatistics {
                            beta: T::lit(l.beta),
                            kappa: T::lit(l.kappa),
                            g: vec_from_pairs(&l.g),
                            d0: vec_from_pairs(&l.d0),
                            sigma: mat_from_pairs(&l.sigma)?,
                        })
                    })
                    .collect::<Result<Vec<_>>>()
            })
            .collect::<Result<Vec<_>>>()?;
        let stats = ChannelStatistics {
            num_sat_antennas: self.num_sat_antennas,
            num_ut_antennas: self.num_ut_antennas,
            links,
        };
        stats.validate()?;
        Ok(stats)
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct EffectiveChannelDocument {
    pub schema: String,
    pub version: u32,
    pub h_hat: Vec<Vec<Pair>>,
    pub d_hat: Vec<Vec<Pair>>,
    pub g_block: Vec<Vec<Pair>>,
}

impl EffectiveChannelDocument {
    pub fn from_channel<T: Real>(ch: &EffectiveChannel<T>) -> Self {
        EffectiveChannelDocument {
            schema: EFFECTIVE_SCHEMA.into(),
            version: SCHEMA_VERSION,
            h_hat: mat_to_pairs(&ch.h_hat),
            d_hat: mat_to_pairs(&ch.d_hat),
            g_block: mat_to_pairs(&ch.g_block),
        }
    }

    pub fn to_channel<T: Real>(&self) -> Result<EffectiveChannel<T>> {
        check_header(&self.schema, self.version, EFFECTIVE_SCHEMA)?;
        Ok(EffectiveChannel {
            h_hat: mat_from_pairs(&self.h_hat)?,
            d_hat: mat_from_pairs(&self.d_hat)?,
            g_block: mat_from_pairs(&self.g_block)?,
        })
    }
}
