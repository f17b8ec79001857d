use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Deserializer, Serialize, Serializer};

use crate::error::{Error, Result};

/// One-parameter pair-copula family (plus the parameter-free independence copula).
///
/// The derived ordering is the candidate enumeration order used to break AIC ties.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum FamilyKind {
    Independence,
    Gaussian,
    Clayton,
    Gumbel,
    Frank,
    Joe,
}

/// Counter-clockwise rotation of an asymmetric family.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Rotation {
    R0,
    R90,
    R180,
    R270,
}

impl Rotation {
    pub const ALL: [Rotation; 4] = [Rotation::R0, Rotation::R90, Rotation::R180, Rotation::R270];

    pub fn degrees(self) -> u16 {
        match self {
            Rotation::R0 => 0,
            Rotation::R90 => 90,
            Rotation::R180 => 180,
            Rotation::R270 => 270,
        }
    }

    pub fn from_degrees(deg: u16) -> Option<Self> {
        match deg {
            0 => Some(Rotation::R0),
            90 => Some(Rotation::R90),
            180 => Some(Rotation::R180),
            270 => Some(Rotation::R270),
            _ => None,
        }
    }

    /// Whether the first (resp. second) argument is reflected `x -> 1 - x`.
    pub(crate) fn flips(self) -> (bool, bool) {
        match self {
            Rotation::R0 => (false, false),
            Rotation::R90 => (true, false),
            Rotation::R180 => (true, true),
            Rotation::R270 => (false, true),
        }
    }

    /// 90° and 270° rotations turn positive into negative dependence.
    pub(crate) fn is_negative(self) -> bool {
        matches!(self, Rotation::R90 | Rotation::R270)
    }
}

/// A family together with its rotation.
///
/// Independence, Gaussian and Frank only exist unrotated; their parameter
/// (or lack of one) already covers negative dependence.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct FamilyId {
    kind: FamilyKind,
    rotation: Rotation,
}

impl FamilyId {
    pub const INDEPENDENCE: FamilyId = FamilyId {
        kind: FamilyKind::Independence,
        rotation: Rotation::R0,
    };
    pub const GAUSSIAN: FamilyId = FamilyId {
        kind: FamilyKind::Gaussian,
        rotation: Rotation::R0,
    };
    pub const FRANK: FamilyId = FamilyId {
        kind: FamilyKind::Frank,
        rotation: Rotation::R0,
    };

    pub fn new(kind: FamilyKind, rotation: Rotation) -> Result<Self> {
        let symmetric = matches!(
            kind,
            FamilyKind::Independence | FamilyKind::Gaussian | FamilyKind::Frank
        );
        if symmetric && rotation != Rotation::R0 {
            return Err(Error::InvalidInput(format!(
                "{kind:?} has no {}° rotation",
                rotation.degrees()
            )));
        }
        Ok(FamilyId { kind, rotation })
    }

    pub fn clayton(rotation: Rotation) -> Self {
        FamilyId {
            kind: FamilyKind::Clayton,
            rotation,
        }
    }

    pub fn gumbel(rotation: Rotation) -> Self {
        FamilyId {
            kind: FamilyKind::Gumbel,
            rotation,
        }
    }

    pub fn joe(rotation: Rotation) -> Self {
        FamilyId {
            kind: FamilyKind::Joe,
            rotation,
        }
    }

    pub fn kind(self) -> FamilyKind {
        self.kind
    }

    pub fn rotation(self) -> Rotation {
        self.rotation
    }

    /// Every supported family, in enumeration order.
    pub fn all() -> Vec<FamilyId> {
        let mut out = vec![Self::INDEPENDENCE, Self::GAUSSIAN];
        out.extend(Rotation::ALL.iter().map(|&r| Self::clayton(r)));
        out.extend(Rotation::ALL.iter().map(|&r| Self::gumbel(r)));
        out.push(Self::FRANK);
        out.extend(Rotation::ALL.iter().map(|&r| Self::joe(r)));
        out
    }

    /// Number of free parameters (enters the AIC penalty).
    pub fn n_params(self) -> usize {
        match self.kind {
            FamilyKind::Independence => 0,
            _ => 1,
        }
    }

    /// Closed intervals searched by maximum likelihood. Frank is split around 0.
    pub fn fit_bounds(self) -> Vec<(f64, f64)> {
        match self.kind {
            FamilyKind::Independence => vec![],
            FamilyKind::Gaussian => vec![(-0.9999, 0.9999)],
            FamilyKind::Clayton => vec![(1e-4, 50.0)],
            FamilyKind::Gumbel | FamilyKind::Joe => vec![(1.0 + 1e-4, 50.0)],
            FamilyKind::Frank => vec![(-35.0, -FRANK_MIN_ABS), (FRANK_MIN_ABS, 35.0)],
        }
    }

    /// Checks that `theta` lies in the family's parameter domain.
    pub fn check_param(self, theta: f64) -> Result<()> {
        let fail = |bound| {
            Err(Error::ParameterOutOfRange {
                family: self,
                theta,
                bound,
            })
        };
        if !theta.is_finite() {
            return fail("finite parameter");
        }
        match self.kind {
            FamilyKind::Independence => Ok(()),
            FamilyKind::Gaussian if theta.abs() >= 1.0 => fail("-1 < rho < 1"),
            FamilyKind::Clayton if theta <= 0.0 => fail("theta > 0"),
            FamilyKind::Gumbel | FamilyKind::Joe if theta < 1.0 => fail("theta >= 1"),
            FamilyKind::Frank if theta.abs() < FRANK_MIN_ABS => fail("|theta| >= 1e-4"),
            _ => Ok(()),
        }
    }

    pub fn token(self) -> String {
        let base = match self.kind {
            FamilyKind::Independence => "indep",
            FamilyKind::Gaussian => "gaussian",
            FamilyKind::Clayton => "clayton",
            FamilyKind::Gumbel => "gumbel",
            FamilyKind::Frank => "frank",
            FamilyKind::Joe => "joe",
        };
        match self.rotation {
            Rotation::R0 => base.to_string(),
            r => format!("{base}{}", r.degrees()),
        }
    }
}

/// Frank parameters closer to zero than this are rejected.
pub const FRANK_MIN_ABS: f64 = 1e-4;

impl fmt::Display for FamilyId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.token())
    }
}

impl FromStr for FamilyId {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let s = s.trim().to_ascii_lowercase();
        let split = s
            .find(|c: char| c.is_ascii_digit())
            .unwrap_or(s.len());
        let (name, deg) = s.split_at(split);
        let kind = match name {
            "indep" | "independence" => FamilyKind::Independence,
            "gaussian" => FamilyKind::Gaussian,
            "clayton" => FamilyKind::Clayton,
            "gumbel" => FamilyKind::Gumbel,
            "frank" => FamilyKind::Frank,
            "joe" => FamilyKind::Joe,
            _ => return Err(Error::InvalidInput(format!("unknown copula family `{s}`"))),
        };
        let rotation = if deg.is_empty() {
            Rotation::R0
        } else {
            deg.parse::<u16>()
                .ok()
                .and_then(Rotation::from_degrees)
                .filter(|r| *r != Rotation::R0)
                .ok_or_else(|| Error::InvalidInput(format!("bad rotation in `{s}`")))?
        };
        FamilyId::new(kind, rotation)
    }
}

impl Serialize for FamilyId {
    fn serialize<S: Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        s.serialize_str(&self.token())
    }
}

impl<'de> Deserialize<'de> for FamilyId {
    fn deserialize<D: Deserializer<'de>>(d: D) -> std::result::Result<Self, D::Error> {
        let s = String::deserialize(d)?;
        s.parse().map_err(serde::de::Error::custom)
    }
}

/// Parses a comma-separated family list; `all` expands to every family.
pub fn parse_family_list(spec: &str) -> Result<Vec<FamilyId>> {
    let mut out = Vec::new();
    for part in spec.split(',').map(str::trim).filter(|p| !p.is_empty()) {
        if part.eq_ignore_ascii_case("all") {
            out.extend(FamilyId::all());
        } else {
            out.push(part.parse()?);
        }
    }
    out.sort();
    out.dedup();
    if out.is_empty() {
        return Err(Error::InvalidInput("empty family list".into()));
    }
    Ok(out)
}
