//! Calibrated one-way WAN delays per client city. RTT is reported as
//! twice the one-way value.

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::time::SimTime;

#[derive(Debug, Error)]
#[error("unknown city {0:?} in WAN profile")]
pub struct UnknownCity(pub String);

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct WanProfile {
    one_way: BTreeMap<String, SimTime>,
}

impl WanProfile {
    pub fn new() -> Self {
        Self::default()
    }

    /// Measured RTTs of 17.5 / 18.4 / 146.8 ms for Ottawa, Montreal and
    /// Beijing, stored as one-way halves.
    pub fn measured() -> Self {
        let mut p = Self::new();
        p.insert("Ottawa", SimTime::from_micros(8_750));
        p.insert("Montreal", SimTime::from_micros(9_200));
        p.insert("Beijing", SimTime::from_micros(73_400));
        p
    }

    pub fn insert(&mut self, city: &str, one_way: SimTime) {
        self.one_way.insert(city.to_string(), one_way);
    }

    pub fn one_way_delay(&self, city: &str) -> Result<SimTime, UnknownCity> {
        self.one_way
            .get(city)
            .copied()
            .ok_or_else(|| UnknownCity(city.to_string()))
    }

    pub fn rtt(&self, city: &str) -> Result<SimTime, UnknownCity> {
        let d = self.one_way_delay(city)?;
        Ok(d + d)
    }

    pub fn cities(&self) -> impl Iterator<Item = &str> {
        self.one_way.keys().map(|s| s.as_str())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn measured_cities_match_reported_rtts() {
        let p = WanProfile::measured();
        assert_eq!(p.one_way_delay("Ottawa").unwrap(), SimTime::from_micros(8_750));
        assert_eq!(p.rtt("Ottawa").unwrap(), SimTime::from_micros(17_500));
        assert_eq!(p.rtt("Montreal").unwrap(), SimTime::from_micros(18_400));
        assert_eq!(p.one_way_delay("Beijing").unwrap(), SimTime::from_micros(73_400));
        assert_eq!(p.rtt("Beijing").unwrap(), SimTime::from_micros(146_800));
    }

    #[test]
    fn unknown_city_errors() {
        assert!(WanProfile::measured().one_way_delay("Atlantis").is_err());
    }

    #[test]
    fn zero_delay_profile() {
        let mut p = WanProfile::new();
        p.insert("Here", SimTime::ZERO);
        assert_eq!(p.one_way_delay("Here").unwrap(), SimTime::ZERO);
    }
}
