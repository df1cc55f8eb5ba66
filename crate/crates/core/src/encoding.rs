//! Per-target observation features in a pursuer's local frame, and the
//! k-nearest mask applied at execution time.

use std::cmp::Ordering;

use serde::{Deserialize, Serialize};

use crate::belief::GaussianBelief;
use crate::geometry::{global_to_local_polar, rotate_into_frame, Pose2};
use crate::{Error, Result};

pub const FEATURE_DIM: usize = 6;

/// Ranges below this are treated as coincident.
const MIN_RANGE: f64 = 1e-6;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TargetFeature {
    pub r: f64,
    pub theta: f64,
    pub r_dot: f64,
    pub theta_dot: f64,
    pub logdet_cov: f64,
    pub observed: f64,
}

impl TargetFeature {
    pub fn to_array(&self) -> [f64; FEATURE_DIM] {
        [self.r, self.theta, self.r_dot, self.theta_dot, self.logdet_cov, self.observed]
    }

    pub fn from_array(a: [f64; FEATURE_DIM]) -> Self {
        Self { r: a[0], theta: a[1], r_dot: a[2], theta_dot: a[3], logdet_cov: a[4], observed: a[5] }
    }
}

/// Unordered collection of target features as seen by one pursuer.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FeatureSet {
    pub features: Vec<TargetFeature>,
    pub target_ids: Vec<usize>,
}

impl FeatureSet {
    pub fn new(features: Vec<TargetFeature>, target_ids: Vec<usize>) -> Result<Self> {
        if features.len() != target_ids.len() {
            return Err(Error::InvalidArgument("features and target ids differ in length".into()));
        }
        if features.is_empty() {
            return Err(Error::InvalidArgument("feature set must not be empty".into()));
        }
        let mut ids = target_ids.clone();
        ids.sort_unstable();
        if ids.windows(2).any(|w| w[0] == w[1]) {
            return Err(Error::InvalidArgument("duplicate target id".into()));
        }
        Ok(Self { features, target_ids })
    }

    pub fn len(&self) -> usize {
        self.features.len()
    }

    pub fn is_empty(&self) -> bool {
        self.features.is_empty()
    }

    pub fn rows(&self) -> Vec<[f64; FEATURE_DIM]> {
        self.features.iter().map(TargetFeature::to_array).collect()
    }

    /// Id of the element with the smallest range (lowest id on ties).
    pub fn nearest_target(&self) -> Option<usize> {
        self.features
            .iter()
            .zip(&self.target_ids)
            .min_by(|(a, ia), (b, ib)| by_range(a.r, **ia, b.r, **ib))
            .map(|(_, id)| *id)
    }
}

fn by_range(ra: f64, ia: usize, rb: f64, ib: usize) -> Ordering {
    ra.total_cmp(&rb).then(ia.cmp(&ib))
}

/// Feature vector for one belief, given its precomputed `log det`.
pub fn encode_target_with_logdet(
    agent: &Pose2,
    agent_velocity: [f64; 2],
    belief: &GaussianBelief,
    logdet: f64,
    observed: bool,
) -> TargetFeature {
    let pos = belief.position();
    let (r, theta) = global_to_local_polar(agent, pos);
    let (r_dot, theta_dot) = if r < MIN_RANGE {
        (0.0, 0.0)
    } else {
        let vel = belief.velocity();
        let dp = rotate_into_frame(agent.heading, [pos[0] - agent.x, pos[1] - agent.y]);
        let dv = rotate_into_frame(
            agent.heading,
            [vel[0] - agent_velocity[0], vel[1] - agent_velocity[1]],
        );
        (
            (dp[0] * dv[0] + dp[1] * dv[1]) / r,
            (dp[0] * dv[1] - dp[1] * dv[0]) / (r * r),
        )
    };
    TargetFeature {
        r,
        theta,
        r_dot,
        theta_dot,
        logdet_cov: logdet,
        observed: if observed { 1.0 } else { 0.0 },
    }
}

pub fn encode_target(
    agent: &Pose2,
    agent_velocity: [f64; 2],
    belief: &GaussianBelief,
    observed: bool,
) -> Result<TargetFeature> {
    Ok(encode_target_with_logdet(agent, agent_velocity, belief, belief.logdet()?, observed))
}

/// One feature per belief, ids `0..m`. `logdets[j]` must be the log det of `beliefs[j]`.
pub fn encode_observation(
    agent: &Pose2,
    agent_velocity: [f64; 2],
    beliefs: &[GaussianBelief],
    logdets: &[f64],
    observed: &[bool],
) -> Result<FeatureSet> {
    if beliefs.is_empty() {
        return Err(Error::InvalidArgument("no targets to encode".into()));
    }
    if beliefs.len() != logdets.len() || beliefs.len() != observed.len() {
        return Err(Error::InvalidArgument("belief, logdet and flag counts differ".into()));
    }
    let features = beliefs
        .iter()
        .zip(logdets)
        .zip(observed)
        .map(|((b, &ld), &o)| encode_target_with_logdet(agent, agent_velocity, b, ld, o))
        .collect();
    Ok(FeatureSet { features, target_ids: (0..beliefs.len()).collect() })
}

/// Keeps the `k` elements with the smallest belief range, ties to the lower
/// target id, preserving the original relative order of the survivors.
pub fn mask_k_nearest(fs: &FeatureSet, k: usize) -> Result<FeatureSet> {
    if k == 0 {
        return Err(Error::InvalidArgument("mask size k must be at least 1".into()));
    }
    if k >= fs.len() {
        return Ok(fs.clone());
    }
    let mut order: Vec<usize> = (0..fs.len()).collect();
    let key = |i: &usize| (fs.features[*i].r, fs.target_ids[*i]);
    order.select_nth_unstable_by(k - 1, |a, b| {
        let (ra, ia) = key(a);
        let (rb, ib) = key(b);
        by_range(ra, ia, rb, ib)
    });
    let mut keep = vec![false; fs.len()];
    for &i in &order[..k] {
        keep[i] = true;
    }
    let (features, target_ids) = fs
        .features
        .iter()
        .zip(&fs.target_ids)
        .zip(&keep)
        .filter(|(_, &kept)| kept)
        .map(|((f, id), _)| (*f, *id))
        .unzip();
    Ok(FeatureSet { features, target_ids })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::stream::SeededStream;
    use nalgebra::{Matrix4, Vector4};
    use rand::seq::SliceRandom;
    use rand::Rng;
    use std::f64::consts::PI;

    fn belief(mean: [f64; 4]) -> GaussianBelief {
        GaussianBelief::new(Vector4::from(mean), Matrix4::identity())
    }

    fn with_ranges(rs: &[f64]) -> FeatureSet {
        let features = rs
            .iter()
            .map(|&r| TargetFeature { r, theta: 0.0, r_dot: 0.0, theta_dot: 0.0, logdet_cov: 0.0, observed: 0.0 })
            .collect();
        FeatureSet { features, target_ids: (0..rs.len()).collect() }
    }

    #[test]
    fn static_agent_example() {
        let f = encode_target(&Pose2::new(0.0, 0.0, 0.0), [0.0, 0.0], &belief([3.0, 4.0, 0.0, 0.0]), false).unwrap();
        assert!((f.r - 5.0).abs() < 1e-12);
        assert!((f.theta - 4f64.atan2(3.0)).abs() < 1e-12);
        assert_eq!((f.r_dot, f.theta_dot, f.logdet_cov, f.observed), (0.0, 0.0, 0.0, 0.0));
    }

    #[test]
    fn radial_recession() {
        let f = encode_target(&Pose2::new(0.0, 0.0, 1.0), [0.0, 0.0], &belief([3.0, 4.0, 0.6, 0.8]), true).unwrap();
        assert!((f.r_dot - 1.0).abs() < 1e-12);
        assert!(f.theta_dot.abs() < 1e-12);
        assert_eq!(f.observed, 1.0);
    }

    #[test]
    fn tangential_motion_and_agent_velocity() {
        // target at (5,0) moving +y at 1 m/s: theta_dot = 1/5
        let f = encode_target(&Pose2::new(0.0, 0.0, 0.0), [0.0, 0.0], &belief([5.0, 0.0, 0.0, 1.0]), false).unwrap();
        assert!((f.theta_dot - 0.2).abs() < 1e-12 && f.r_dot.abs() < 1e-12);
        // agent driving toward a static target closes range at its own speed
        let f = encode_target(&Pose2::new(0.0, 0.0, 0.0), [2.0, 0.0], &belief([5.0, 0.0, 0.0, 0.0]), false).unwrap();
        assert!((f.r_dot + 2.0).abs() < 1e-12);
    }

    #[test]
    fn coincident_mean_has_zero_rates() {
        let f = encode_target(&Pose2::new(1.0, 2.0, 0.4), [1.0, 0.0], &belief([1.0, 2.0, 3.0, -1.0]), false).unwrap();
        assert_eq!((f.r, f.theta, f.r_dot, f.theta_dot), (0.0, 0.0, 0.0, 0.0));
    }

    #[test]
    fn encoding_is_rigid_invariant() {
        let mut rng = SeededStream::new(21);
        for _ in 0..1000 {
            let agent = Pose2::new(rng.gen_range(-30.0..30.0), rng.gen_range(-30.0..30.0), rng.gen_range(-PI..PI));
            let av = [rng.gen_range(-2.0..2.0), rng.gen_range(-2.0..2.0)];
            let m = [rng.gen_range(-30.0..30.0), rng.gen_range(-30.0..30.0), rng.gen_range(-2.0..2.0), rng.gen_range(-2.0..2.0)];
            let f0 = encode_target_with_logdet(&agent, av, &belief(m), 0.7, true);

            let rot = rng.gen_range(-PI..PI);
            let t = [rng.gen_range(-100.0..100.0), rng.gen_range(-100.0..100.0)];
            let (s, c) = rot.sin_cos();
            let rp = |x: f64, y: f64| [c * x - s * y, s * x + c * y];
            let ap = rp(agent.x, agent.y);
            let agent2 = Pose2::new(ap[0] + t[0], ap[1] + t[1], crate::geometry::wrap(agent.heading + rot));
            let mp = rp(m[0], m[1]);
            let mv = rp(m[2], m[3]);
            let b2 = belief([mp[0] + t[0], mp[1] + t[1], mv[0], mv[1]]);
            let f1 = encode_target_with_logdet(&agent2, rp(av[0], av[1]), &b2, 0.7, true);
            assert!((f0.r - f1.r).abs() < 1e-9);
            assert!(crate::geometry::wrap(f0.theta - f1.theta).abs() < 1e-9);
            assert!((f0.r_dot - f1.r_dot).abs() < 1e-9);
            assert!((f0.theta_dot - f1.theta_dot).abs() < 1e-9);
        }
    }

    #[test]
    fn observation_has_one_feature_per_target() {
        let beliefs: Vec<_> = (0..5).map(|j| belief([j as f64, 1.0, 0.0, 0.0])).collect();
        let fs = encode_observation(&Pose2::new(0.0, 0.0, 0.0), [0.0, 0.0], &beliefs, &[0.0; 5], &[false; 5]).unwrap();
        assert_eq!(fs.len(), 5);
        assert_eq!(fs.target_ids, vec![0, 1, 2, 3, 4]);
        assert!(encode_observation(&Pose2::new(0.0, 0.0, 0.0), [0.0, 0.0], &[], &[], &[]).is_err());
    }

    #[test]
    fn mask_examples() {
        let out = mask_k_nearest(&with_ranges(&[5.0, 2.0, 9.0]), 2).unwrap();
        assert_eq!(out.target_ids, vec![0, 1]);
        assert_eq!(out.features[0].r, 5.0);

        let fs = with_ranges(&[5.0, 2.0, 9.0]);
        assert_eq!(mask_k_nearest(&fs, 3).unwrap(), fs);
        assert_eq!(mask_k_nearest(&fs, 10).unwrap(), fs);

        assert_eq!(mask_k_nearest(&with_ranges(&[3.0, 3.0]), 1).unwrap().target_ids, vec![0]);
        assert!(mask_k_nearest(&fs, 0).is_err());
        assert_eq!(mask_k_nearest(&fs, 1).unwrap().target_ids, vec![fs.nearest_target().unwrap()]);
    }

    pub(crate) fn sort_truncate(fs: &FeatureSet, k: usize) -> FeatureSet {
        let mut idx: Vec<usize> = (0..fs.len()).collect();
        idx.sort_by(|&a, &b| {
            fs.features[a].r.partial_cmp(&fs.features[b].r).unwrap().then(fs.target_ids[a].cmp(&fs.target_ids[b]))
        });
        idx.truncate(k);
        idx.sort();
        FeatureSet {
            features: idx.iter().map(|&i| fs.features[i]).collect(),
            target_ids: idx.iter().map(|&i| fs.target_ids[i]).collect(),
        }
    }

    #[test]
    fn mask_matches_sort_oracle() {
        let mut rng = SeededStream::new(8);
        for _ in 0..2000 {
            let n = rng.gen_range(1..20);
            // coarse ranges force ties
            let rs: Vec<f64> = (0..n).map(|_| rng.gen_range(0..6) as f64).collect();
            let mut fs = with_ranges(&rs);
            fs.target_ids.shuffle(&mut rng);
            for k in 1..=n + 1 {
                assert_eq!(mask_k_nearest(&fs, k).unwrap(), sort_truncate(&fs, k));
            }
        }
    }
}
