//! Synthetic multitemporal scenes: disc-shaped changes on a flat background,
//! corrupted by unit-mean gamma speckle.

use rand::Rng;

use crate::error::{Error, Result};
use crate::raster::{Coord, Raster, ReferenceMap, TemporalPair};
use crate::seed::{self, stream};

#[derive(Debug, Clone, PartialEq)]
pub struct SceneSpec {
    pub width: usize,
    pub height: usize,
    pub n_blobs: usize,
    pub radius_min: usize,
    pub radius_max: usize,
    pub looks: u32,
    pub bg_level: f64,
    pub fg_level: f64,
    pub seed: u64,
}

impl Default for SceneSpec {
    fn default() -> Self {
        SceneSpec {
            width: 128,
            height: 128,
            n_blobs: 3,
            radius_min: 6,
            radius_max: 12,
            looks: 2,
            bg_level: 60.0,
            fg_level: 140.0,
            seed: 0,
        }
    }
}

impl SceneSpec {
    pub fn with_seed(seed: u64) -> Self {
        SceneSpec {
            seed,
            ..Default::default()
        }
    }

    pub fn validate(&self) -> Result<()> {
        let p = |m: String| Err(Error::Parameter(m));
        if self.width == 0 || self.height == 0 {
            return p(format!("scene size {}x{} is empty", self.width, self.height));
        }
        if self.looks == 0 {
            return p("looks must be at least 1".into());
        }
        let levels_ok = [self.bg_level, self.fg_level]
            .iter()
            .all(|v| v.is_finite() && *v >= 0.0);
        if !levels_ok {
            return p("reflectivity levels must be finite and non-negative".into());
        }
        if self.fg_level == self.bg_level {
            return p("foreground and background levels must differ".into());
        }
        if self.radius_min > self.radius_max {
            return p(format!(
                "radius range [{}, {}] is empty",
                self.radius_min, self.radius_max
            ));
        }
        if self.n_blobs > 0 && 2 * self.radius_max + 1 > self.width.min(self.height) {
            return p(format!(
                "discs of radius {} do not fit in {}x{}",
                self.radius_max, self.width, self.height
            ));
        }
        Ok(())
    }

    /// Manifest lines `key=value`, one per field.
    pub fn manifest(&self) -> String {
        format!(
            "width={}\nheight={}\nblobs={}\nradius_min={}\nradius_max={}\nlooks={}\nbg_level={}\nfg_level={}\nseed={}\n",
            self.width,
            self.height,
            self.n_blobs,
            self.radius_min,
            self.radius_max,
            self.looks,
            self.bg_level,
            self.fg_level,
            self.seed
        )
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Disc {
    pub center: Coord,
    pub radius: usize,
}

impl Disc {
    pub fn contains(&self, c: Coord) -> bool {
        let dr = c.row as i64 - self.center.row as i64;
        let dc = c.col as i64 - self.center.col as i64;
        let r = self.radius as i64;
        dr * dr + dc * dc <= r * r
    }
}

/// Noise-free reflectivity of both dates plus the change mask.
#[derive(Debug, Clone, PartialEq)]
pub struct CleanScene {
    pub t1: Raster,
    pub t2: Raster,
    pub reference: ReferenceMap,
    pub discs: Vec<Disc>,
}

/// Paints `discs` at `fg_level` into the second date.
pub fn render_discs(spec: &SceneSpec, discs: &[Disc]) -> Result<CleanScene> {
    let (w, h) = (spec.width, spec.height);
    let mut reference = ReferenceMap::unchanged(w, h)?;
    let mut t2 = vec![spec.bg_level; w * h];
    for d in discs {
        let r0 = d.center.row.saturating_sub(d.radius);
        let r1 = (d.center.row + d.radius).min(h - 1);
        let c0 = d.center.col.saturating_sub(d.radius);
        let c1 = (d.center.col + d.radius).min(w - 1);
        for row in r0..=r1 {
            for col in c0..=c1 {
                let c = Coord::new(row, col);
                if d.contains(c) {
                    reference.set(c, true);
                    t2[row * w + col] = spec.fg_level;
                }
            }
        }
    }
    Ok(CleanScene {
        t1: Raster::filled(w, h, spec.bg_level)?,
        t2: Raster::new(w, h, t2)?,
        reference,
        discs: discs.to_vec(),
    })
}

/// Draws `n_blobs` discs fully inside the image and renders them.
pub fn generate_reflectivity(spec: &SceneSpec) -> Result<CleanScene> {
    spec.validate()?;
    let mut rng = seed::stream_rng(spec.seed, stream::SCENE_GEOMETRY);
    let discs: Vec<Disc> = (0..spec.n_blobs)
        .map(|_| {
            let radius = rng.gen_range(spec.radius_min..=spec.radius_max);
            let row = rng.gen_range(radius..spec.height - radius);
            let col = rng.gen_range(radius..spec.width - radius);
            Disc {
                center: Coord::new(row, col),
                radius,
            }
        })
        .collect();
    render_discs(spec, &discs)
}

/// One unit-mean gamma multiplier with shape `looks`: the mean of `looks`
/// unit exponentials.
pub fn gamma_multiplier<R: Rng + ?Sized>(looks: u32, rng: &mut R) -> f64 {
    let mut s = 0.0;
    for _ in 0..looks {
        let u: f64 = rng.gen();
        s -= (1.0 - u).ln();
    }
    s / f64::from(looks)
}

/// Multiplies every pixel, in row-major order, by an independent gamma multiplier.
pub fn apply_speckle<R: Rng + ?Sized>(clean: &Raster, looks: u32, rng: &mut R) -> Result<Raster> {
    if looks == 0 {
        return Err(Error::Parameter("looks must be at least 1".into()));
    }
    let values = clean
        .values()
        .iter()
        .map(|&v| v * gamma_multiplier(looks, rng))
        .collect();
    Raster::new(clean.width(), clean.height(), values)
}

#[derive(Debug, Clone, PartialEq)]
pub struct Scene {
    pub pair: TemporalPair,
    pub reference: ReferenceMap,
    pub clean: CleanScene,
}

pub fn generate_scene(spec: &SceneSpec) -> Result<Scene> {
    let clean = generate_reflectivity(spec)?;
    let t1 = apply_speckle(
        &clean.t1,
        spec.looks,
        &mut seed::stream_rng(spec.seed, stream::SPECKLE_T1),
    )?;
    let t2 = apply_speckle(
        &clean.t2,
        spec.looks,
        &mut seed::stream_rng(spec.seed, stream::SPECKLE_T2),
    )?;
    Ok(Scene {
        pair: TemporalPair::new(t1, t2)?,
        reference: clean.reference.clone(),
        clean,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn no_blobs_means_no_change() {
        let spec = SceneSpec {
            n_blobs: 0,
            ..Default::default()
        };
        let c = generate_reflectivity(&spec).unwrap();
        assert_eq!(c.reference.count_changed(), 0);
        assert_eq!(c.t1, c.t2);
    }

    #[test]
    fn disc_pixel_count() {
        let spec = SceneSpec {
            width: 32,
            height: 32,
            ..Default::default()
        };
        let disc = Disc {
            center: Coord::new(16, 16),
            radius: 3,
        };
        let c = render_discs(&spec, &[disc]).unwrap();
        // Brute-force count of integer offsets with dx^2 + dy^2 <= 9.
        let mut expect = 0;
        for dy in -3i32..=3 {
            for dx in -3i32..=3 {
                if dx * dx + dy * dy <= 9 {
                    expect += 1;
                }
            }
        }
        assert_eq!(expect, 29);
        assert_eq!(c.reference.count_changed(), expect);
    }

    #[test]
    fn reference_is_support_of_difference() {
        let c = generate_reflectivity(&SceneSpec::with_seed(5)).unwrap();
        for (i, &l) in c.reference.labels().iter().enumerate() {
            assert_eq!(l == 1, c.t1.values()[i] != c.t2.values()[i]);
        }
        assert!(c.reference.count_changed() > 0);
    }

    #[test]
    fn rejects_bad_specs() {
        let base = SceneSpec::default();
        for bad in [
            SceneSpec { fg_level: 60.0, ..base.clone() },
            SceneSpec { looks: 0, ..base.clone() },
            SceneSpec { radius_max: 64, ..base.clone() },
            SceneSpec { radius_min: 13, ..base.clone() },
        ] {
            assert!(matches!(generate_reflectivity(&bad), Err(Error::Parameter(_))));
        }
    }

    #[test]
    fn speckle_keeps_zero() {
        let clean = Raster::filled(4, 4, 0.0).unwrap();
        let out = apply_speckle(&clean, 1, &mut seed::rng(1)).unwrap();
        assert!(out.values().iter().all(|&v| v == 0.0));
    }

    #[test]
    fn same_seed_same_scene() {
        let a = generate_scene(&SceneSpec::with_seed(42)).unwrap();
        let b = generate_scene(&SceneSpec::with_seed(42)).unwrap();
        assert_eq!(a, b);
        let c = generate_scene(&SceneSpec::with_seed(43)).unwrap();
        assert_ne!(a.pair, c.pair);
    }

    #[test]
    fn manifest_lists_every_field() {
        let m = SceneSpec::default().manifest();
        for key in [
            "width=128", "height=128", "blobs=3", "radius_min=6", "radius_max=12", "looks=2",
            "bg_level=60", "fg_level=140", "seed=0",
        ] {
            assert!(m.lines().any(|l| l == key), "missing {key}");
        }
    }
}
