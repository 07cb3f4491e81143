//! Viterbi decoding of the best candidate sequence over a short window.

/// One frame of the decoding window. No candidates marks an invalid frame,
/// which is bridged: its valid neighbours are linked directly.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct DpFrame {
    pub scores: Vec<f64>,
    /// Restricts the frame to one candidate, used for a frame whose result
    /// was already committed.
    pub anchor: Option<usize>,
}

impl DpFrame {
    pub fn new(scores: Vec<f64>) -> Self {
        DpFrame { scores, anchor: None }
    }

    pub fn is_valid(&self) -> bool {
        !self.scores.is_empty()
    }

    fn allowed(&self, a: usize) -> bool {
        self.anchor.is_none_or(|k| k == a)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct DpPath {
    /// Chosen candidate per frame, `None` on invalid frames.
    pub choice: Vec<Option<usize>>,
    /// Sum of negated scores and transition costs; infinite when every path
    /// crosses a forbidden transition.
    pub energy: f64,
    /// Set when no finite path exists and the choice fell back to the best
    /// score per frame.
    pub low_confidence: bool,
}

/// Minimizes `sum(-score) + sum(cost)` over one candidate per valid frame.
/// `cost(i, a, j, b)` is the transition cost from candidate `a` of frame `i`
/// to candidate `b` of frame `j`, the next valid frame after `i`. Ties go to
/// the lowest candidate index.
pub fn temporal_dp(frames: &[DpFrame], mut cost: impl FnMut(usize, usize, usize, usize) -> f64) -> DpPath {
    let valid: Vec<usize> = (0..frames.len()).filter(|&i| frames[i].is_valid()).collect();
    let mut choice = vec![None; frames.len()];
    if valid.is_empty() {
        return DpPath {
            choice,
            energy: 0.0,
            low_confidence: false,
        };
    }
    // energy[k][b]: best energy of a path ending at candidate b of valid[k]
    let mut energy: Vec<Vec<f64>> = Vec::with_capacity(valid.len());
    let mut back: Vec<Vec<usize>> = Vec::with_capacity(valid.len());
    let f0 = &frames[valid[0]];
    energy.push(
        f0.scores
            .iter()
            .enumerate()
            .map(|(a, &s)| if f0.allowed(a) { -s } else { f64::INFINITY })
            .collect(),
    );
    back.push(vec![0; f0.scores.len()]);
    for k in 1..valid.len() {
        let (i, j) = (valid[k - 1], valid[k]);
        let prev = &energy[k - 1];
        let fj = &frames[j];
        let mut e = vec![f64::INFINITY; fj.scores.len()];
        let mut bp = vec![0; fj.scores.len()];
        for (b, &s) in fj.scores.iter().enumerate() {
            if !fj.allowed(b) {
                continue;
            }
            let mut best = f64::INFINITY;
            let mut arg = 0;
            for (a, &ea) in prev.iter().enumerate() {
                if ea == f64::INFINITY {
                    continue;
                }
                let v = ea + cost(i, a, j, b);
                if v < best {
                    best = v;
                    arg = a;
                }
            }
            e[b] = best - s;
            bp[b] = arg;
        }
        energy.push(e);
        back.push(bp);
    }
    let last = energy.last().expect("non-empty");
    let (mut b, best) = last
        .iter()
        .enumerate()
        .fold((0, f64::INFINITY), |acc, (b, &v)| if v < acc.1 { (b, v) } else { acc });
    if best == f64::INFINITY {
        for &i in &valid {
            let f = &frames[i];
            choice[i] = f.anchor.or_else(|| argmax(&f.scores));
        }
        return DpPath {
            choice,
            energy: f64::INFINITY,
            low_confidence: true,
        };
    }
    for k in (0..valid.len()).rev() {
        choice[valid[k]] = Some(b);
        b = back[k][b];
    }
    DpPath {
        choice,
        energy: best,
        low_confidence: false,
    }
}

fn argmax(v: &[f64]) -> Option<usize> {
    let mut best: Option<usize> = None;
    for (i, &x) in v.iter().enumerate() {
        if best.is_none_or(|b| x > v[b]) {
            best = Some(i);
        }
    }
    best
}

/// Energy of a given choice under the same rules as [`temporal_dp`].
pub fn path_energy(
    frames: &[DpFrame],
    choice: &[Option<usize>],
    mut cost: impl FnMut(usize, usize, usize, usize) -> f64,
) -> f64 {
    let mut e = 0.0;
    let mut prev: Option<(usize, usize)> = None;
    for (j, c) in choice.iter().enumerate() {
        let Some(b) = *c else { continue };
        e -= frames[j].scores[b];
        if let Some((i, a)) = prev {
            e += cost(i, a, j, b);
        }
        prev = Some((j, b));
    }
    e
}
