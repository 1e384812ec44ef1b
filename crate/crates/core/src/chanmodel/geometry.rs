use rand::Rng;
use serde::{Deserialize, Serialize};

use super::{ChannelError, Endpoint};

/// Cartesian position in meters; index 2 is depth below the surface.
pub type Vec3 = [f64; 3];

/// Node and sink placement inside the simulation box.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Geometry3D {
    bounds: Vec3,
    sink: Vec3,
    nodes: Vec<Vec3>,
    drift: Vec<Vec3>,
}

impl Geometry3D {
    pub fn new(bounds: Vec3, sink: Vec3, nodes: Vec<Vec3>, drift: Vec<Vec3>) -> Result<Self, ChannelError> {
        if bounds.iter().any(|b| !(b.is_finite() && *b > 0.0)) {
            return Err(ChannelError::InvalidEnv(format!("box dimensions must be positive: {bounds:?}")));
        }
        if drift.len() != nodes.len() {
            return Err(ChannelError::InvalidEnv(format!("{} drift vectors for {} nodes", drift.len(), nodes.len())));
        }
        let geometry = Self { bounds, sink, nodes, drift };
        geometry.check(Endpoint::Sink, sink)?;
        for (i, p) in geometry.nodes.iter().enumerate() {
            geometry.check(Endpoint::Node(i), *p)?;
        }
        Ok(geometry)
    }

    /// Uniform node placement; sink at the horizontal centre, mid-depth.
    pub fn random<R: Rng + ?Sized>(bounds: Vec3, n_nodes: usize, max_drift_speed: f64, rng: &mut R) -> Self {
        let sink = [bounds[0] / 2.0, bounds[1] / 2.0, bounds[2] / 2.0];
        let nodes = (0..n_nodes)
            .map(|_| [rng.random::<f64>() * bounds[0], rng.random::<f64>() * bounds[1], rng.random::<f64>() * bounds[2]])
            .collect();
        let drift = (0..n_nodes)
            .map(|_| {
                let heading = rng.random::<f64>() * std::f64::consts::TAU;
                let speed = rng.random::<f64>() * max_drift_speed;
                [speed * heading.cos(), speed * heading.sin(), 0.0]
            })
            .collect();
        Self { bounds, sink, nodes, drift }
    }

    fn check(&self, endpoint: Endpoint, p: Vec3) -> Result<(), ChannelError> {
        let inside = p.iter().zip(self.bounds.iter()).all(|(x, b)| x.is_finite() && *x >= 0.0 && x <= b);
        if inside {
            Ok(())
        } else {
            Err(ChannelError::OutOfBounds { endpoint, position: p, bounds: self.bounds })
        }
    }

    pub fn bounds(&self) -> Vec3 {
        self.bounds
    }

    pub fn sink(&self) -> Vec3 {
        self.sink
    }

    pub fn nodes(&self) -> &[Vec3] {
        &self.nodes
    }

    pub fn n_nodes(&self) -> usize {
        self.nodes.len()
    }

    pub fn position(&self, endpoint: Endpoint) -> Result<Vec3, ChannelError> {
        match endpoint {
            Endpoint::Sink => Ok(self.sink),
            Endpoint::Node(i) => self.nodes.get(i).copied().ok_or(ChannelError::UnknownNode(i)),
        }
    }

    pub fn distance(&self, a: Endpoint, b: Endpoint) -> Result<f64, ChannelError> {
        Ok(distance(self.position(a)?, self.position(b)?))
    }

    /// Moves every node by `drift * dt`, reflecting off the box walls.
    pub fn advance(&mut self, dt: f64) {
        for (p, v) in self.nodes.iter_mut().zip(self.drift.iter_mut()) {
            for axis in 0..3 {
                let (x, vel) = reflect(p[axis] + v[axis] * dt, v[axis], self.bounds[axis]);
                p[axis] = x;
                v[axis] = vel;
            }
        }
    }
}

pub(crate) fn distance(a: Vec3, b: Vec3) -> f64 {
    a.iter().zip(b.iter()).map(|(x, y)| (x - y) * (x - y)).sum::<f64>().sqrt()
}

fn reflect(mut x: f64, mut v: f64, hi: f64) -> (f64, f64) {
    // folds repeatedly so very large steps still land inside [0, hi]
    loop {
        if x < 0.0 {
            x = -x;
            v = -v;
        } else if x > hi {
            x = 2.0 * hi - x;
            v = -v;
        } else {
            return (x, v);
        }
    }
}
