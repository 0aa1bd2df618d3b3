use std::io::Write;

use serde::{Deserialize, Serialize};

use super::StlError;

/// One named, uniformly sampled signal.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Channel {
    pub name: String,
    /// Free-form unit annotation, e.g. `"m"` or `"m^2/s^2"`.
    pub units: String,
    pub samples: Vec<f64>,
}

/// A multi-channel signal sampled every `dt` seconds starting at `t0`.
///
/// Sample `k` of every channel corresponds to time `t0 + k * dt`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Trace {
    channels: Vec<Channel>,
    dt: f64,
    t0: f64,
}

impl Trace {
    pub fn new(dt: f64, t0: f64) -> Result<Self, StlError> {
        if !(dt > 0.0 && dt.is_finite()) {
            return Err(StlError::InvalidTrace(format!(
                "sampling period must be positive, got {dt}"
            )));
        }
        Ok(Self {
            channels: Vec::new(),
            dt,
            t0,
        })
    }

    /// Builds a trace from `(name, samples)` pairs with empty unit strings.
    pub fn from_channels<S: Into<String>>(
        dt: f64,
        t0: f64,
        channels: impl IntoIterator<Item = (S, Vec<f64>)>,
    ) -> Result<Self, StlError> {
        let mut trace = Self::new(dt, t0)?;
        for (name, samples) in channels {
            trace.push_channel(name, "", samples)?;
        }
        Ok(trace)
    }

    /// Appends a channel. All channels must share the same non-zero length and
    /// names must be unique.
    pub fn push_channel(
        &mut self,
        name: impl Into<String>,
        units: impl Into<String>,
        samples: Vec<f64>,
    ) -> Result<(), StlError> {
        let name = name.into();
        if samples.is_empty() {
            return Err(StlError::InvalidTrace(format!("channel `{name}` is empty")));
        }
        if let Some(first) = self.channels.first() {
            if first.samples.len() != samples.len() {
                return Err(StlError::InvalidTrace(format!(
                    "channel `{name}` has {} samples, expected {}",
                    samples.len(),
                    first.samples.len()
                )));
            }
        }
        if self.index_of(&name).is_some() {
            return Err(StlError::InvalidTrace(format!(
                "duplicate channel `{name}`"
            )));
        }
        self.channels.push(Channel {
            name,
            units: units.into(),
            samples,
        });
        Ok(())
    }

    pub fn dt(&self) -> f64 {
        self.dt
    }

    pub fn t0(&self) -> f64 {
        self.t0
    }

    /// Number of samples per channel (0 for a trace without channels).
    pub fn len(&self) -> usize {
        self.channels.first().map_or(0, |c| c.samples.len())
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn time(&self, k: usize) -> f64 {
        self.t0 + k as f64 * self.dt
    }

    pub fn channels(&self) -> &[Channel] {
        &self.channels
    }

    pub fn channel_names(&self) -> impl Iterator<Item = &str> {
        self.channels.iter().map(|c| c.name.as_str())
    }

    pub fn index_of(&self, name: &str) -> Option<usize> {
        self.channels.iter().position(|c| c.name == name)
    }

    pub fn channel(&self, name: &str) -> Option<&[f64]> {
        self.index_of(name)
            .map(|i| self.channels[i].samples.as_slice())
    }

    pub fn channel_mut(&mut self, name: &str) -> Option<&mut Vec<f64>> {
        self.channels
            .iter_mut()
            .find(|c| c.name == name)
            .map(|c| &mut c.samples)
    }

    /// Replaces or inserts a channel.
    pub fn set_channel(
        &mut self,
        name: &str,
        units: &str,
        samples: Vec<f64>,
    ) -> Result<(), StlError> {
        match self.index_of(name) {
            Some(i) => {
                if samples.len() != self.len() {
                    return Err(StlError::InvalidTrace(format!(
                        "channel `{name}` has {} samples, expected {}",
                        samples.len(),
                        self.len()
                    )));
                }
                self.channels[i].samples = samples;
                self.channels[i].units = units.to_string();
                Ok(())
            }
            None => self.push_channel(name, units, samples),
        }
    }

    /// Extends every channel to `len` samples by repeating its last sample.
    pub fn extend_hold(&mut self, len: usize) {
        for c in &mut self.channels {
            if let Some(&last) = c.samples.last() {
                c.samples.resize(len.max(c.samples.len()), last);
            }
        }
    }

    /// Copy of samples `[start, end)` re-anchored at the matching start time.
    pub fn slice(&self, start: usize, end: usize) -> Result<Trace, StlError> {
        if start >= end || end > self.len() {
            return Err(StlError::InvalidTrace(format!(
                "slice [{start}, {end}) outside trace of length {}",
                self.len()
            )));
        }
        let mut out = Trace::new(self.dt, self.time(start))?;
        for c in &self.channels {
            out.push_channel(
                c.name.clone(),
                c.units.clone(),
                c.samples[start..end].to_vec(),
            )?;
        }
        Ok(out)
    }

    /// Writes the trace as CSV: a `time` column followed by one column per
    /// channel, one row per sample.
    pub fn write_csv<W: Write>(&self, writer: W) -> Result<(), csv::Error> {
        let mut w = csv::Writer::from_writer(writer);
        let mut header = vec!["time".to_string()];
        header.extend(self.channels.iter().map(|c| c.name.clone()));
        w.write_record(&header)?;
        for k in 0..self.len() {
            let mut row = Vec::with_capacity(self.channels.len() + 1);
            row.push(self.time(k).to_string());
            row.extend(self.channels.iter().map(|c| c.samples[k].to_string()));
            w.write_record(&row)?;
        }
        w.flush()?;
        Ok(())
    }
}
