use std::collections::BTreeMap;
use std::io::{BufRead, Write};

use rand::seq::SliceRandom;
use rand::Rng;
use serde::de::DeserializeOwned;
use serde::{Deserialize, Serialize};

use super::coherence::top_words;
use super::sample_distinct_words;
use crate::error::{Error, Result};
use crate::grid::{Cell, CountingGrid};

/// One word-intrusion item: in-group words plus one intruder, shuffled.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct IntrusionTask {
    pub task_id: usize,
    pub words: Vec<String>,
    pub answer_index: usize,
    /// Side of the in-group block (1, 2 or 3).
    pub window: usize,
    /// Toroidal distance from the in-group anchor to the intruder's cell.
    pub distance: f64,
    pub model_id: String,
    pub in_group_size: usize,
    pub word_ids: Vec<usize>,
    pub source_location: usize,
    pub intruder_cell: usize,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct IntrusionConfig {
    pub window: usize,
    pub in_group_size: usize,
    /// Intruders come from this lowest-probability fraction of the in-group distribution.
    pub bottom_quantile: f64,
    /// ...and must be among this many top words of some cell outside the block.
    pub top_k_other: usize,
    pub max_retries: usize,
}

impl Default for IntrusionConfig {
    fn default() -> Self {
        IntrusionConfig {
            window: 1,
            in_group_size: 5,
            bottom_quantile: 0.1,
            top_k_other: 5,
            max_retries: 1000,
        }
    }
}

impl IntrusionConfig {
    /// Words ranked lowest by `dist` (ties by id) that form the bottom quantile.
    pub fn bottom_words(&self, dist: &[f64]) -> Vec<usize> {
        let mut idx: Vec<usize> = (0..dist.len()).collect();
        idx.sort_by(|a, b| dist[*a].total_cmp(&dist[*b]).then(a.cmp(b)));
        let n = ((self.bottom_quantile * dist.len() as f64).ceil() as usize).min(dist.len());
        idx.truncate(n);
        idx
    }
}

/// Cells of the `size x size` block anchored at `anchor`.
fn block(grid: &CountingGrid, anchor: Cell, size: usize) -> Vec<usize> {
    let g = grid.geometry();
    let mut out = Vec::with_capacity(size * size);
    for dx in 0..size {
        for dy in 0..size {
            out.push(g.index(g.wrap((anchor.x + dx) as isize, (anchor.y + dy) as isize)));
        }
    }
    out
}

/// Generates `count` tasks; `vocab` names the words shown.
pub fn generate_intrusion_tasks<R: Rng + ?Sized>(
    grid: &CountingGrid,
    vocab: &[String],
    count: usize,
    config: &IntrusionConfig,
    model_id: &str,
    rng: &mut R,
) -> Result<Vec<IntrusionTask>> {
    if !(1..=3).contains(&config.window) {
        return Err(Error::Sampling(format!("in-group window {} is not 1, 2 or 3", config.window)));
    }
    if config.in_group_size == 0 {
        return Err(Error::Sampling("in-group size must be positive".into()));
    }
    if vocab.len() != grid.vocab_size() {
        return Err(Error::DimensionMismatch {
            expected: grid.vocab_size(),
            actual: vocab.len(),
        });
    }
    let g = *grid.geometry();
    let top_sets: Vec<Vec<usize>> = (0..g.cells()).map(|i| top_words(&grid.pi_at(i), config.top_k_other)).collect();
    let mut tasks = Vec::with_capacity(count);
    for task_id in 0..count {
        let mut made = None;
        for _ in 0..config.max_retries {
            let location = rng.gen_range(0..g.cells());
            let anchor = g.cell(location);
            let dist = grid.block_average(anchor, config.window);
            let Some(in_group) = sample_distinct_words(&dist, config.in_group_size, rng) else {
                continue;
            };
            let inside = block(grid, anchor, config.window);
            let bottom = config.bottom_words(&dist);
            let mut is_bottom = vec![false; dist.len()];
            bottom.iter().for_each(|w| is_bottom[*w] = true);
            let candidates: Vec<(usize, usize)> = (0..g.cells())
                .filter(|c| !inside.contains(c))
                .flat_map(|c| top_sets[c].iter().map(move |w| (*w, c)))
                .filter(|(w, _)| is_bottom[*w] && !in_group.contains(w))
                .collect();
            let Some(&(intruder, cell)) = candidates.choose(rng) else {
                continue;
            };
            made = Some((location, in_group, intruder, cell));
            break;
        }
        let (location, mut in_group, intruder, cell) = made.ok_or_else(|| {
            Error::Sampling(format!("no qualifying intruder after {} locations", config.max_retries))
        })?;
        in_group.shuffle(rng);
        let answer_index = rng.gen_range(0..=in_group.len());
        in_group.insert(answer_index, intruder);
        tasks.push(IntrusionTask {
            task_id,
            words: in_group.iter().map(|w| vocab[*w].clone()).collect(),
            answer_index,
            window: config.window,
            distance: g.toroidal_distance(g.cell(location), g.cell(cell)),
            model_id: model_id.to_string(),
            in_group_size: config.in_group_size,
            word_ids: in_group,
            source_location: location,
            intruder_cell: cell,
        });
    }
    Ok(tasks)
}

/// A worker's pick for one task.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct IntrusionAnswer {
    pub task_id: usize,
    pub choice: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct AccuracyBin {
    pub lo: f64,
    pub hi: f64,
    pub answered: usize,
    pub accuracy: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct IntrusionScore {
    pub answered: usize,
    pub correct: usize,
    pub accuracy: f64,
    /// Accuracy per in-group window size.
    pub by_window: BTreeMap<usize, AccuracyBin>,
    /// Accuracy per intruder-distance bin of width `bin_width`.
    pub by_distance: Vec<AccuracyBin>,
    /// Answers naming a task that is not in the task list.
    pub unknown: Vec<usize>,
}

/// Scores answers against tasks; several answers for one task all count.
pub fn score_intrusion(tasks: &[IntrusionTask], answers: &[IntrusionAnswer], bin_width: f64) -> IntrusionScore {
    let by_id: BTreeMap<usize, &IntrusionTask> = tasks.iter().map(|t| (t.task_id, t)).collect();
    let mut window_tally: BTreeMap<usize, (usize, usize)> = BTreeMap::new();
    let mut dist_tally: BTreeMap<i64, (usize, usize)> = BTreeMap::new();
    let mut unknown = Vec::new();
    let (mut answered, mut correct) = (0, 0);
    let width = if bin_width > 0.0 { bin_width } else { 1.0 };
    for a in answers {
        let Some(t) = by_id.get(&a.task_id) else {
            unknown.push(a.task_id);
            continue;
        };
        let hit = usize::from(a.choice == t.answer_index);
        answered += 1;
        correct += hit;
        let w = window_tally.entry(t.window).or_default();
        w.0 += 1;
        w.1 += hit;
        let d = dist_tally.entry((t.distance / width).floor() as i64).or_default();
        d.0 += 1;
        d.1 += hit;
    }
    let ratio = |n: usize, k: usize| if n > 0 { k as f64 / n as f64 } else { f64::NAN };
    IntrusionScore {
        answered,
        correct,
        accuracy: ratio(answered, correct),
        by_window: window_tally
            .into_iter()
            .map(|(w, (n, k))| {
                (
                    w,
                    AccuracyBin {
                        lo: w as f64,
                        hi: w as f64,
                        answered: n,
                        accuracy: ratio(n, k),
                    },
                )
            })
            .collect(),
        by_distance: dist_tally
            .into_iter()
            .map(|(b, (n, k))| AccuracyBin {
                lo: b as f64 * width,
                hi: (b + 1) as f64 * width,
                answered: n,
                accuracy: ratio(n, k),
            })
            .collect(),
        unknown,
    }
}

/// Writes one JSON object per line.
pub fn write_tasks_jsonl<W: Write>(tasks: &[IntrusionTask], mut out: W) -> Result<()> {
    for t in tasks {
        serde_json::to_writer(&mut out, t)?;
        out.write_all(b"\n")?;
    }
    Ok(())
}

/// Reads JSON lines, skipping blank ones.
pub fn read_jsonl<T: DeserializeOwned, R: BufRead>(input: R) -> Result<Vec<T>> {
    let mut out = Vec::new();
    for (n, line) in input.lines().enumerate() {
        let line = line?;
        if line.trim().is_empty() {
            continue;
        }
        out.push(serde_json::from_str(&line).map_err(|e| Error::Parse {
            line: n + 1,
            msg: e.to_string(),
        })?);
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::grid::GridGeometry;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn banded_grid() -> CountingGrid {
        // cell i favours words 2i and 2i + 1 strongly
        let g = GridGeometry::square(4, 2).unwrap();
        let z = 32;
        let cells: Vec<Vec<f64>> = (0..16)
            .map(|i| {
                let mut v = vec![0.01; z];
                v[2 * i] = 3.0;
                v[2 * i + 1] = 2.0;
                v[(2 * i + 2) % z] = 1.0;
                let s: f64 = v.iter().sum();
                v.into_iter().map(|x| x / s).collect()
            })
            .collect();
        CountingGrid::from_cell_distributions(g, &cells).unwrap()
    }

    #[test]
    fn tasks_have_one_recoverable_intruder() {
        let grid = banded_grid();
        let vocab: Vec<String> = (0..32).map(|i| format!("w{i}")).collect();
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        for window in 1..=3 {
            let cfg = IntrusionConfig {
                window,
                in_group_size: 3,
                ..Default::default()
            };
            let tasks = generate_intrusion_tasks(&grid, &vocab, 50, &cfg, "m", &mut rng).unwrap();
            for t in &tasks {
                assert_eq!(t.words.len(), 4);
                let intruder = t.word_ids[t.answer_index];
                let dist = grid.block_average(grid.geometry().cell(t.source_location), window);
                assert!(cfg.bottom_words(&dist).contains(&intruder));
                assert!(top_words(&grid.pi_at(t.intruder_cell), 5).contains(&intruder));
                let mut ids = t.word_ids.clone();
                ids.sort_unstable();
                ids.dedup();
                assert_eq!(ids.len(), 4);
            }
        }
    }

    #[test]
    fn scoring_bins_by_window_and_distance() {
        let mk = |id, window, distance| IntrusionTask {
            task_id: id,
            words: vec![],
            answer_index: 1,
            window,
            distance,
            model_id: String::new(),
            in_group_size: 5,
            word_ids: vec![],
            source_location: 0,
            intruder_cell: 0,
        };
        let tasks = vec![mk(0, 1, 0.5), mk(1, 1, 1.5), mk(2, 2, 1.2)];
        let answers = vec![
            IntrusionAnswer { task_id: 0, choice: 1 },
            IntrusionAnswer { task_id: 1, choice: 0 },
            IntrusionAnswer { task_id: 2, choice: 1 },
            IntrusionAnswer { task_id: 9, choice: 1 },
        ];
        let s = score_intrusion(&tasks, &answers, 1.0);
        assert_eq!((s.answered, s.correct), (3, 2));
        assert_eq!(s.by_window[&1].accuracy, 0.5);
        assert_eq!(s.by_window[&2].accuracy, 1.0);
        assert_eq!(s.by_distance.len(), 2);
        assert_eq!(s.by_distance[1].answered, 2);
        assert_eq!(s.unknown, vec![9]);
    }

    #[test]
    fn jsonl_round_trip() {
        let grid = banded_grid();
        let vocab: Vec<String> = (0..32).map(|i| format!("w{i}")).collect();
        let mut rng = ChaCha8Rng::seed_from_u64(4);
        let tasks = generate_intrusion_tasks(&grid, &vocab, 5, &IntrusionConfig::default(), "m", &mut rng).unwrap();
        let mut buf = Vec::new();
        write_tasks_jsonl(&tasks, &mut buf).unwrap();
        let back: Vec<IntrusionTask> = read_jsonl(&buf[..]).unwrap();
        assert_eq!(back, tasks);
    }
}
