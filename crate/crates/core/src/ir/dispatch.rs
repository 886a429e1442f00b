use std::collections::{BTreeSet, HashSet};

use super::{Name, ProcId, Program};

/// The classes a receiver may have: a known set, or unknown (every class).
#[derive(Clone, Debug, PartialEq, Eq)]
pub enum ReceiverClasses {
    Top,
    Set(BTreeSet<Name>),
}

impl Program {
    /// First binding of `method` found walking `class` and then its supers
    /// depth-first, in declaration order.
    pub fn lookup(&self, class: &str, method: &str) -> Option<&ProcId> {
        let mut seen = HashSet::new();
        self.lookup_in(class, method, &mut seen)
    }

    fn lookup_in<'a>(
        &'a self,
        class: &str,
        method: &str,
        seen: &mut HashSet<Name>,
    ) -> Option<&'a ProcId> {
        let c = self.class(class)?;
        if !seen.insert(c.name.clone()) {
            return None;
        }
        if let Some(p) = c.methods.get(method) {
            return Some(p);
        }
        c.supers
            .iter()
            .find_map(|s| self.lookup_in(s, method, seen))
    }

    pub fn dispatch_targets(&self, method: &str, receivers: &ReceiverClasses) -> BTreeSet<ProcId> {
        match receivers {
            ReceiverClasses::Top => self
                .classes
                .iter()
                .filter_map(|c| self.lookup(&c.name, method))
                .cloned()
                .collect(),
            ReceiverClasses::Set(classes) => classes
                .iter()
                .filter_map(|c| self.lookup(c, method))
                .cloned()
                .collect(),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::ir::parse;

    const SRC: &str = "
        class X { abstract poly; }
        class Y : X { method poly = poly@Y; }
        class Z : X { method poly = poly@Z; }
        class W : Y {}
        proc poly@Y(this, o) { return o; }
        proc poly@Z(this, o) { r = new X@14; return r; }
    ";

    fn set(names: &[&str]) -> ReceiverClasses {
        ReceiverClasses::Set(names.iter().map(|n| Name::from(*n)).collect())
    }

    #[test]
    fn dispatch_on_known_class() {
        let p = parse(SRC).unwrap();
        let t = p.dispatch_targets("poly", &set(&["Y"]));
        assert_eq!(t.into_iter().collect::<Vec<_>>(), vec![ProcId::new("poly@Y")]);
        let t = p.dispatch_targets("poly", &set(&["W"]));
        assert_eq!(t.len(), 1);
        assert!(p.dispatch_targets("poly", &set(&["X"])).is_empty());
    }

    #[test]
    fn top_is_union() {
        let p = parse(SRC).unwrap();
        let top = p.dispatch_targets("poly", &ReceiverClasses::Top);
        assert_eq!(top.len(), 2);
        let all = set(&["X", "Y", "Z", "W"]);
        assert_eq!(p.dispatch_targets("poly", &all), top);
    }
}
