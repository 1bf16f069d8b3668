//! Minimal symbolic calculus for resource inequalities over three resource
//! kinds: a noisy channel `<N>`, secret key bits `[cc]*`, and private
//! classical bits `[c->c]*`.
//!
//! Grammar (whitespace-insensitive): `<N> + 0.5[cc]* >= 0.7[c->c]*`, with a
//! rate prefix optional (defaulting to 1) and terms optional on each side.

use std::fmt;

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord)]
pub enum ResourceKind {
    /// One use per channel symbol of the noisy channel, rate fixed at 1.
    Channel,
    /// Shared secret key bits.
    SecretKey,
    /// Private classical bits (receiver learns them, eavesdropper decoupled).
    PrivateBit,
}

impl ResourceKind {
    fn token(&self) -> &'static str {
        match self {
            ResourceKind::Channel => "<N>",
            ResourceKind::SecretKey => "[cc]*",
            ResourceKind::PrivateBit => "[c->c]*",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Resource {
    pub kind: ResourceKind,
    pub rate: f64,
}

impl Resource {
    pub fn new(kind: ResourceKind, rate: f64) -> Result<Self> {
        if rate < 0.0 || !rate.is_finite() {
            return Err(Error::InvalidArgument(format!(
                "resource rate must be a nonnegative finite number, got {rate}"
            )));
        }
        if kind == ResourceKind::Channel && rate != 1.0 {
            return Err(Error::InvalidArgument(
                "channel resources carry rate 1".into(),
            ));
        }
        Ok(Resource { kind, rate })
    }
}

impl fmt::Display for Resource {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self.kind {
            ResourceKind::Channel => write!(f, "{}", self.kind.token()),
            _ => write!(f, "{}{}", self.rate, self.kind.token()),
        }
    }
}

/// `lhs >= rhs` with a human-readable derivation trace.
#[derive(Debug, Clone, PartialEq)]
pub struct ResourceInequality {
    pub lhs: Vec<Resource>,
    pub rhs: Vec<Resource>,
    pub provenance: Vec<String>,
}

impl ResourceInequality {
    pub fn new(lhs: Vec<Resource>, rhs: Vec<Resource>, provenance: Vec<String>) -> Self {
        ResourceInequality {
            lhs: canonical_side(lhs, false),
            rhs: canonical_side(rhs, true),
            provenance,
        }
    }

    pub fn channel_count(&self) -> usize {
        self.lhs
            .iter()
            .filter(|r| r.kind == ResourceKind::Channel)
            .count()
    }

    fn rate_of(side: &[Resource], kind: ResourceKind) -> f64 {
        // `+ 0.0` normalizes the empty sum's -0.0 identity.
        side.iter()
            .filter(|r| r.kind == kind)
            .map(|r| r.rate)
            .sum::<f64>()
            + 0.0
    }

    pub fn lhs_rate(&self, kind: ResourceKind) -> f64 {
        Self::rate_of(&self.lhs, kind)
    }

    pub fn rhs_rate(&self, kind: ResourceKind) -> f64 {
        Self::rate_of(&self.rhs, kind)
    }
}

impl fmt::Display for ResourceInequality {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let side = |terms: &[Resource]| -> String {
            if terms.is_empty() {
                "0".to_string()
            } else {
                terms
                    .iter()
                    .map(Resource::to_string)
                    .collect::<Vec<_>>()
                    .join(" + ")
            }
        };
        write!(f, "{} >= {}", side(&self.lhs), side(&self.rhs))
    }
}

/// Merge duplicate kinds, order (channel, key, private bit), drop zero-rate
/// terms. A side that would become empty keeps its zero-rate terms so the
/// conclusion `<N> >= 0[c->c]*` stays expressible.
fn canonical_side(terms: Vec<Resource>, keep_zero_if_empty: bool) -> Vec<Resource> {
    let mut merged: Vec<Resource> = Vec::new();
    for kind in [
        ResourceKind::Channel,
        ResourceKind::SecretKey,
        ResourceKind::PrivateBit,
    ] {
        let matching: Vec<&Resource> = terms.iter().filter(|r| r.kind == kind).collect();
        if matching.is_empty() {
            continue;
        }
        let rate = if kind == ResourceKind::Channel {
            1.0
        } else {
            matching.iter().map(|r| r.rate).sum()
        };
        merged.push(Resource { kind, rate });
    }
    let nonzero: Vec<Resource> = merged
        .iter()
        .copied()
        .filter(|r| r.kind == ResourceKind::Channel || r.rate > 0.0)
        .collect();
    if nonzero.is_empty() && keep_zero_if_empty {
        merged
    } else {
        nonzero
    }
}

// ---------------------------------------------------------------------------
// Parsing
// ---------------------------------------------------------------------------

/// Parse a resource inequality; syntax errors carry the byte position.
pub fn parse_ri(text: &str) -> Result<ResourceInequality> {
    let split_at = text.find(">=").ok_or_else(|| {
        Error::parse("resource inequality is missing `>=`".to_string())
    })?;
    let lhs = parse_side(&text[..split_at], 0)?;
    let rhs = parse_side(&text[split_at + 2..], split_at + 2)?;
    Ok(ResourceInequality::new(
        lhs,
        rhs,
        vec![format!("parsed from `{}`", text.trim())],
    ))
}

fn parse_side(side: &str, base_offset: usize) -> Result<Vec<Resource>> {
    let mut out = Vec::new();
    let mut cursor = 0usize;
    for part in side.split('+') {
        let trimmed = part.trim();
        let pos = base_offset + cursor + leading_ws(part);
        if trimmed.is_empty() {
            return Err(Error::parse(format!("empty resource term at byte {pos}")));
        }
        out.push(parse_term(trimmed, pos)?);
        cursor += part.len() + 1;
    }
    Ok(out)
}

fn leading_ws(s: &str) -> usize {
    s.len() - s.trim_start().len()
}

fn parse_term(term: &str, pos: usize) -> Result<Resource> {
    let compact: String = term.chars().filter(|c| !c.is_whitespace()).collect();
    let (rate_text, kind) = if let Some(stripped) = compact.strip_suffix("<N>") {
        (stripped, ResourceKind::Channel)
    } else if let Some(stripped) = compact.strip_suffix("[cc]*") {
        (stripped, ResourceKind::SecretKey)
    } else if let Some(stripped) = compact.strip_suffix("[c->c]*") {
        (stripped, ResourceKind::PrivateBit)
    } else {
        return Err(Error::parse(format!(
            "unknown resource `{term}` at byte {pos} (expected <N>, [cc]*, or [c->c]*)"
        )));
    };
    let rate = if rate_text.is_empty() {
        1.0
    } else {
        rate_text.parse::<f64>().map_err(|_| {
            Error::parse(format!("bad rate `{rate_text}` at byte {pos}"))
        })?
    };
    if rate < 0.0 {
        return Err(Error::parse(format!(
            "negative rate `{rate}` at byte {pos}"
        )));
    }
    if kind == ResourceKind::Channel && rate != 1.0 {
        return Err(Error::parse(format!(
            "channel term must have rate 1 at byte {pos}"
        )));
    }
    Ok(Resource { kind, rate })
}

// ---------------------------------------------------------------------------
// Derivations
// ---------------------------------------------------------------------------

/// The key-assisted protocol at its corner point: consuming key at the
/// eavesdropper's information rate buys private bits at the receiver's rate.
pub fn instantiate_father(i_ab: f64, i_ae: f64) -> Result<ResourceInequality> {
    if i_ab < 0.0 || i_ae < 0.0 {
        return Err(Error::InvalidArgument(format!(
            "father protocol rates must be nonnegative, got ({i_ab}, {i_ae})"
        )));
    }
    Ok(ResourceInequality::new(
        vec![
            Resource::new(ResourceKind::Channel, 1.0)?,
            Resource::new(ResourceKind::SecretKey, i_ae)?,
        ],
        vec![Resource::new(ResourceKind::PrivateBit, i_ab)?],
        vec![format!(
            "father protocol instantiated at (I(A;B), I(A;E)) = ({i_ab}, {i_ae})"
        )],
    ))
}

/// The noiseless conversion `[c->c]* >= [cc]*`: a private bit can serve as a
/// fresh secret key bit.
pub fn appending_rule() -> ResourceInequality {
    ResourceInequality::new(
        vec![Resource {
            kind: ResourceKind::PrivateBit,
            rate: 1.0,
        }],
        vec![Resource {
            kind: ResourceKind::SecretKey,
            rate: 1.0,
        }],
        vec!["noiseless conversion of private bits into secret key".to_string()],
    )
}

/// Append `rule` to `father` catalytically: the key consumed on the left is
/// regenerated (1:1) from the private bits produced on the right, leaving an
/// unassisted protocol. Negative net rates are clipped to 0 and flagged in
/// the trace.
pub fn compose_catalytic(
    father: &ResourceInequality,
    rule: &ResourceInequality,
) -> Result<ResourceInequality> {
    let consumed = rule.lhs_rate(ResourceKind::PrivateBit);
    let produced_key = rule.rhs_rate(ResourceKind::SecretKey);
    if consumed <= 0.0 || produced_key <= 0.0 || rule.channel_count() != 0 {
        return Err(Error::InvalidArgument(
            "appending rule must convert private bits into secret key".into(),
        ));
    }
    if (consumed - produced_key).abs() > 1e-12 {
        return Err(Error::InvalidArgument(
            "appending rule must convert at rate 1:1".into(),
        ));
    }
    let key_needed = father.lhs_rate(ResourceKind::SecretKey);
    let produced_private = father.rhs_rate(ResourceKind::PrivateBit);
    if produced_private <= 0.0 && key_needed > 0.0 {
        return Err(Error::InvalidArgument(
            "father produces no private bits for the rule to consume".into(),
        ));
    }
    let net = produced_private - key_needed;
    let clipped = net < 0.0;

    let lhs: Vec<Resource> = father
        .lhs
        .iter()
        .copied()
        .filter(|r| r.kind != ResourceKind::SecretKey)
        .collect();
    let rhs = vec![Resource {
        kind: ResourceKind::PrivateBit,
        rate: net.max(0.0),
    }];
    let mut provenance = father.provenance.clone();
    provenance.extend(rule.provenance.iter().cloned());
    provenance.push(format!(
        "appended: {key_needed} key bits regenerated from produced private bits{}",
        if clipped { " (net rate clipped at 0)" } else { "" }
    ));
    Ok(ResourceInequality::new(lhs, rhs, provenance))
}

/// Full derivation of the unassisted child protocol from corner-point rates.
pub fn derive_child(i_ab: f64, i_ae: f64) -> Result<ResourceInequality> {
    let father = instantiate_father(i_ab, i_ae)?;
    let mut child = compose_catalytic(&father, &appending_rule())?;
    // Direct rate accounting nets I(A;B) − I(A;E); on pure channel states
    // that equals twice the coherent information, not the coherent
    // information itself. We report the accounting result and flag this.
    child.provenance.push(format!(
        "note: net rate {} = I(A;B) − I(A;E); on pure channel states this is 2·I_c(A⟩B)",
        child.rhs_rate(ResourceKind::PrivateBit)
    ));
    Ok(child)
}
