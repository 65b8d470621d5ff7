use std::fmt;
use std::io::Write;

use crate::error::Result;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Phase {
    Naive,
    Reverse,
    Resample,
}

impl Phase {
    pub fn as_str(self) -> &'static str {
        match self {
            Phase::Naive => "naive",
            Phase::Reverse => "reverse",
            Phase::Resample => "resample",
        }
    }
}

impl fmt::Display for Phase {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct TraceEntry {
    pub phase: Phase,
    pub step: usize,
    /// `Σ_j d_j` of the token set at this step. Never positive.
    pub realism: f64,
}

/// Realism of the token set across the naive (`0 → T`), reverse (`T → t*`)
/// and resampling (`t* → T*`) phases.
#[derive(Clone, Debug, Default, PartialEq)]
pub struct RealismTrace {
    entries: Vec<TraceEntry>,
}

impl RealismTrace {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn push(&mut self, phase: Phase, step: usize, realism: f64) {
        self.entries.push(TraceEntry {
            phase,
            step,
            realism,
        });
    }

    pub fn entries(&self) -> &[TraceEntry] {
        &self.entries
    }

    pub fn phase(&self, phase: Phase) -> impl Iterator<Item = &TraceEntry> {
        self.entries.iter().filter(move |e| e.phase == phase)
    }

    /// Last value recorded in a phase.
    pub fn last_of(&self, phase: Phase) -> Option<f64> {
        self.phase(phase).last().map(|e| e.realism)
    }

    /// Value at the end of the whole trace (`T*` for a full run).
    pub fn final_realism(&self) -> Option<f64> {
        self.entries.last().map(|e| e.realism)
    }

    /// `phase,step,realism_sum` rows with a header line.
    pub fn write_csv<W: Write>(&self, mut w: W) -> Result<()> {
        writeln!(w, "phase,step,realism_sum")?;
        for e in &self.entries {
            writeln!(w, "{},{},{}", e.phase, e.step, e.realism)?;
        }
        Ok(())
    }

    /// Mean trace over several runs, one row per `(phase, step)` in order of
    /// first appearance. Each row averages only the runs that visit it.
    pub fn mean_of<'a>(traces: impl IntoIterator<Item = &'a RealismTrace>) -> RealismTrace {
        let mut keys: Vec<(Phase, usize)> = Vec::new();
        let mut sums: Vec<(f64, usize)> = Vec::new();
        for trace in traces {
            for e in &trace.entries {
                let key = (e.phase, e.step);
                let idx = match keys.iter().position(|k| *k == key) {
                    Some(i) => i,
                    None => {
                        keys.push(key);
                        sums.push((0.0, 0));
                        keys.len() - 1
                    }
                };
                sums[idx].0 += e.realism;
                sums[idx].1 += 1;
            }
        }
        // phases run in a fixed order; steps ascend in naive/resample and descend in reverse
        let mut rows: Vec<(Phase, usize, f64)> = keys
            .into_iter()
            .zip(sums)
            .map(|((p, s), (sum, n))| (p, s, sum / n as f64))
            .collect();
        rows.sort_by(|a, b| {
            a.0.cmp(&b.0).then_with(|| match a.0 {
                Phase::Reverse => b.1.cmp(&a.1),
                _ => a.1.cmp(&b.1),
            })
        });
        let mut out = RealismTrace::new();
        for (phase, step, realism) in rows {
            out.push(phase, step, realism);
        }
        out
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn csv_layout() {
        let mut t = RealismTrace::new();
        t.push(Phase::Naive, 1, -2.0);
        t.push(Phase::Reverse, 10, -1.5);
        t.push(Phase::Resample, 10, 0.0);
        let mut buf = Vec::new();
        t.write_csv(&mut buf).unwrap();
        assert_eq!(
            String::from_utf8(buf).unwrap(),
            "phase,step,realism_sum\nnaive,1,-2\nreverse,10,-1.5\nresample,10,0\n"
        );
        assert_eq!(t.final_realism(), Some(0.0));
        assert_eq!(t.last_of(Phase::Reverse), Some(-1.5));
    }

    #[test]
    fn mean_trace_averages_visited_steps() {
        let mut a = RealismTrace::new();
        a.push(Phase::Reverse, 10, -2.0);
        a.push(Phase::Reverse, 9, -1.0);
        let mut b = RealismTrace::new();
        b.push(Phase::Reverse, 10, -4.0);
        let m = RealismTrace::mean_of([&a, &b]);
        assert_eq!(m.entries().len(), 2);
        assert_eq!(m.entries()[0].realism, -3.0);
        assert_eq!(m.entries()[1].step, 9);
        assert_eq!(m.entries()[1].realism, -1.0);
    }
}
