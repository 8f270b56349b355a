//! Plain CSV writers for event logs and trajectories.

use std::io::{self, Write};

use super::state::SpikeEvent;

pub const EVENTS_HEADER: &str = "t,neuron";
pub const TRAJECTORY_HEADER: &str = "t,lambda_bar,mean_potential";

/// Writes `t,neuron` rows. Neuron indices are one-based in the file.
pub fn write_events<W: Write>(mut w: W, events: &[SpikeEvent]) -> io::Result<()> {
    writeln!(w, "{EVENTS_HEADER}")?;
    for e in events {
        writeln!(w, "{},{}", e.t, e.neuron + 1)?;
    }
    Ok(())
}

/// One observation of the mean rate and mean potential.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TrajectoryPoint {
    pub t: f64,
    pub lambda_bar: f64,
    pub mean_potential: f64,
}

pub fn write_trajectory<W: Write>(mut w: W, points: &[TrajectoryPoint]) -> io::Result<()> {
    writeln!(w, "{TRAJECTORY_HEADER}")?;
    for p in points {
        writeln!(w, "{},{},{}", p.t, p.lambda_bar, p.mean_potential)?;
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn header_only_for_empty_log() {
        let mut buf = Vec::new();
        write_events(&mut buf, &[]).unwrap();
        assert_eq!(String::from_utf8(buf).unwrap(), "t,neuron\n");
    }
}
