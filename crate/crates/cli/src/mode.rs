use std::fmt;
use std::str::FromStr;

use hybrid_inline::inline::Mode;

/// An analysis the command line can run: one of the hybrid-inlining modes or
/// one of the top-down references.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum ModeSpec {
    Hybrid(Mode),
    TopCi,
    /// Callsite-sensitive inlining; `None` keeps whole call strings.
    Inline(Option<usize>),
}

impl ModeSpec {
    /// The modes of `--mode all`, in report order.
    pub fn all() -> Vec<ModeSpec> {
        vec![
            ModeSpec::TopCi,
            ModeSpec::Inline(Some(2)),
            ModeSpec::Inline(Some(3)),
            ModeSpec::Inline(None),
            ModeSpec::Hybrid(Mode::ComCi),
            ModeSpec::Hybrid(Mode::HiK(2)),
            ModeSpec::Hybrid(Mode::HiK(3)),
            ModeSpec::Hybrid(Mode::Hia),
        ]
    }

    /// Name used by per-mode expectation overrides in program files.
    pub fn label(&self) -> String {
        match self {
            ModeSpec::Hybrid(m) => m.label(),
            ModeSpec::TopCi | ModeSpec::Inline(Some(0)) => "topci".into(),
            ModeSpec::Inline(Some(k)) => format!("inline{k}"),
            ModeSpec::Inline(None) => "inlineinf".into(),
        }
    }
}

impl fmt::Display for ModeSpec {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            ModeSpec::Hybrid(Mode::ComCi) => f.write_str("comci"),
            ModeSpec::Hybrid(Mode::HiK(k)) => write!(f, "hi:{k}"),
            ModeSpec::Hybrid(Mode::Hia) => f.write_str("hia"),
            ModeSpec::TopCi => f.write_str("topci"),
            ModeSpec::Inline(Some(k)) => write!(f, "inline:{k}"),
            ModeSpec::Inline(None) => f.write_str("inline:inf"),
        }
    }
}

/// The inlining reference with a call-string bound given as a number or `inf`.
pub fn parse_reference(s: &str) -> Result<ModeSpec, String> {
    parse_bound(s).map(ModeSpec::Inline)
}

fn parse_bound(s: &str) -> Result<Option<usize>, String> {
    if s == "inf" {
        return Ok(None);
    }
    s.parse().map(Some).map_err(|_| format!("expected a number or `inf`, got `{s}`"))
}

impl FromStr for ModeSpec {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, String> {
        match s {
            "comci" => return Ok(ModeSpec::Hybrid(Mode::ComCi)),
            "hia" => return Ok(ModeSpec::Hybrid(Mode::Hia)),
            "topci" => return Ok(ModeSpec::TopCi),
            _ => {}
        }
        if let Some(k) = s.strip_prefix("hi:") {
            let k = k.parse().map_err(|_| format!("bad step bound in `{s}`"))?;
            return Ok(ModeSpec::Hybrid(Mode::HiK(k)));
        }
        if let Some(k) = s.strip_prefix("inline:") {
            return parse_bound(k).map(ModeSpec::Inline);
        }
        Err(format!("unknown mode `{s}`"))
    }
}

/// The value of `--mode`: a single mode or all of them.
pub fn parse_modes(s: &str) -> Result<Vec<ModeSpec>, String> {
    if s == "all" {
        Ok(ModeSpec::all())
    } else {
        s.parse().map(|m| vec![m])
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn round_trips() {
        for m in ModeSpec::all() {
            assert_eq!(m.to_string().parse::<ModeSpec>().unwrap(), m);
        }
        assert_eq!("hi:0".parse::<ModeSpec>().unwrap().label(), "hi0");
        assert!("hi:x".parse::<ModeSpec>().is_err());
        assert!("fast".parse::<ModeSpec>().is_err());
    }
}
