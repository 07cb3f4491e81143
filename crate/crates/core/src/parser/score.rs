use crate::features::FeatureMap;

use super::params::dot_f32;

/// Scores of one node over its valid placements at one pyramid level.
#[derive(Debug, Clone, PartialEq)]
pub struct ScoreMap {
    pub width: usize,
    pub height: usize,
    pub data: Vec<f64>,
}

impl ScoreMap {
    pub fn filled(width: usize, height: usize, v: f64) -> ScoreMap {
        ScoreMap {
            width,
            height,
            data: vec![v; width * height],
        }
    }

    pub fn from_vec(width: usize, height: usize, data: Vec<f64>) -> ScoreMap {
        assert_eq!(data.len(), width * height, "score map size");
        ScoreMap { width, height, data }
    }

    pub fn get(&self, x: usize, y: usize) -> f64 {
        self.data[y * self.width + x]
    }

    /// Value at a signed position, `None` outside the map.
    pub fn at(&self, x: i64, y: i64) -> Option<f64> {
        if x < 0 || y < 0 || x as usize >= self.width || y as usize >= self.height {
            None
        } else {
            Some(self.get(x as usize, y as usize))
        }
    }

    /// Mean over finite entries.
    pub fn mean(&self) -> f64 {
        let (s, n) = self
            .data
            .iter()
            .filter(|v| v.is_finite())
            .fold((0.0, 0usize), |(s, n), v| (s + v, n + 1));
        if n == 0 {
            f64::NAN
        } else {
            s / n as f64
        }
    }

    pub fn max(&self) -> f64 {
        self.data.iter().copied().fold(f64::NEG_INFINITY, f64::max)
    }
}

/// Valid cross-correlation of a `w x h` template with a feature level.
/// `None` when the template does not fit.
pub fn score_terminal(level: &FeatureMap, weights: &[f64], w: usize, h: usize) -> Option<ScoreMap> {
    let c = level.channels;
    assert_eq!(weights.len(), w * h * c, "template size");
    if w == 0 || h == 0 || w > level.width || h > level.height {
        return None;
    }
    let ow = level.width - w + 1;
    let oh = level.height - h + 1;
    let mut data = vec![0.0; ow * oh];
    let row_len = w * c;
    for y in 0..oh {
        for x in 0..ow {
            let mut s = 0.0;
            for ry in 0..h {
                s += dot_f32(level.row(x, y + ry, w), &weights[ry * row_len..(ry + 1) * row_len]);
            }
            data[y * ow + x] = s;
        }
    }
    Some(ScoreMap::from_vec(ow, oh, data))
}

/// Pointwise max; ties go to the earliest child.
pub fn score_or(children: &[&ScoreMap]) -> (ScoreMap, Vec<u32>) {
    let first = children.first().expect("Or-node with no children");
    let mut out = (*first).clone();
    let mut arg = vec![0u32; out.data.len()];
    for (k, m) in children.iter().enumerate().skip(1) {
        assert!(
            m.width == out.width && m.height == out.height,
            "Or children misregistered"
        );
        for (i, &v) in m.data.iter().enumerate() {
            if v > out.data[i] {
                out.data[i] = v;
                arg[i] = k as u32;
            }
        }
    }
    (out, arg)
}

pub fn pack_displacement(dx: i32, dy: i32, radius: usize) -> u32 {
    let r = radius as i32;
    ((dy + r) * (2 * r + 1) + (dx + r)) as u32
}

pub fn unpack_displacement(code: u32, radius: usize) -> (i32, i32) {
    let side = 2 * radius as i32 + 1;
    let c = code as i32;
    (c % side - radius as i32, c / side - radius as i32)
}

/// Bounded local max `max_d [child(p + d) - <theta, [dx^2, dx, dy^2, dy]>]`
/// over `d` in `[-R, R]^2`, with packed argmax displacements. Ties keep the
/// first displacement in `(dy, dx)` order.
pub fn deformation_max(child: &ScoreMap, theta: [f64; 4], radius: usize) -> (ScoreMap, Vec<u32>) {
    let r = radius as i64;
    let (w, h) = (child.width as i64, child.height as i64);
    let mut out = ScoreMap::filled(child.width, child.height, f64::NEG_INFINITY);
    let mut arg = vec![0u32; out.data.len()];
    let pen = |dx: i64, dy: i64| {
        let (dx, dy) = (dx as f64, dy as f64);
        theta[0] * dx * dx + theta[1] * dx + theta[2] * dy * dy + theta[3] * dy
    };
    for y in 0..h {
        for x in 0..w {
            let mut best = f64::NEG_INFINITY;
            let mut best_code = pack_displacement(0, 0, radius);
            for dy in -r..=r {
                let yy = y + dy;
                if yy < 0 || yy >= h {
                    continue;
                }
                for dx in -r..=r {
                    let xx = x + dx;
                    if xx < 0 || xx >= w {
                        continue;
                    }
                    let v = child.get(xx as usize, yy as usize) - pen(dx, dy);
                    if v > best {
                        best = v;
                        best_code = pack_displacement(dx as i32, dy as i32, radius);
                    }
                }
            }
            let i = (y * w + x) as usize;
            out.data[i] = best;
            arg[i] = best_code;
        }
    }
    (out, arg)
}

/// Sum of child maps, each read at the parent placement plus its anchor
/// offset. The parent map is `width x height`.
pub fn decompose(width: usize, height: usize, children: &[(&ScoreMap, (usize, usize))]) -> ScoreMap {
    let mut out = ScoreMap::filled(width, height, 0.0);
    for (m, (ox, oy)) in children {
        assert!(
            ox + width <= m.width && oy + height <= m.height,
            "decomposition child map too small"
        );
        for y in 0..height {
            let src = &m.data[(y + oy) * m.width + ox..(y + oy) * m.width + ox + width];
            for (d, s) in out.data[y * width..(y + 1) * width].iter_mut().zip(src) {
                *d += s;
            }
        }
    }
    out
}
