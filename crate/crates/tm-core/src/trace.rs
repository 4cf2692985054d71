//! Trace records, payloads and exact money arithmetic.
//!
//! Traces are the observable output of every simulation. Records are
//! serialized one per line as JSON with a fixed field order so equal runs
//! diff byte-exactly.

use std::collections::BTreeMap;
use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::model::{StageId, ThimacId};
use crate::sim::{CaseId, ConfigId, ThingId};

/// One generic action crossed by a thing. `Bounce` and `Settle` are
/// emitted by the space-lattice simulation only.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Action {
    Create,
    Process,
    Release,
    Transfer,
    Arrive,
    Accept,
    Trigger,
    Bounce,
    Settle,
}

/// State records mark a thing at rest; progression records are pure
/// change and never a resting place.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Mode {
    State,
    Progression,
}

impl Action {
    /// Mode is fully determined by the action: create, process, accept
    /// and settle are states, everything else is progression.
    pub fn mode(self) -> Mode {
        match self {
            Action::Create | Action::Process | Action::Accept | Action::Settle => Mode::State,
            _ => Mode::Progression,
        }
    }
}

impl fmt::Display for Action {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let s = match self {
            Action::Create => "create",
            Action::Process => "process",
            Action::Release => "release",
            Action::Transfer => "transfer",
            Action::Arrive => "arrive",
            Action::Accept => "accept",
            Action::Trigger => "trigger",
            Action::Bounce => "bounce",
            Action::Settle => "settle",
        };
        f.write_str(s)
    }
}

/// One fired generic event.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct TraceRecord {
    pub step: u64,
    pub thing: ThingId,
    pub thimac: ThimacId,
    pub stage: StageId,
    pub action: Action,
    pub mode: Mode,
    #[serde(skip_serializing_if = "Option::is_none", default)]
    pub case: Option<CaseId>,
    #[serde(skip_serializing_if = "Option::is_none", default)]
    pub config: Option<ConfigId>,
}

/// A run's records plus whether the step budget ran out before
/// quiescence.
#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize)]
pub struct Trace {
    pub records: Vec<TraceRecord>,
    pub budget_exhausted: bool,
}

impl Trace {
    /// JSON Lines rendering, one record per line.
    pub fn to_jsonl(&self) -> String {
        let mut out = String::new();
        for rec in &self.records {
            out.push_str(&serde_json::to_string(rec).expect("record serializes"));
            out.push('\n');
        }
        out
    }
}

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum MoneyError {
    #[error("cannot parse `{0}` as a money amount")]
    Parse(String),
    #[error("amount {0} is negative")]
    Negative(Money),
    #[error("money overflow")]
    Overflow,
}

/// Exact decimal money with two fractional digits, stored as cents.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Default, Hash)]
pub struct Money(i64);

impl Money {
    pub const ZERO: Money = Money(0);

    pub fn from_cents(cents: i64) -> Money {
        Money(cents)
    }

    pub fn cents(self) -> i64 {
        self.0
    }

    pub fn is_negative(self) -> bool {
        self.0 < 0
    }

    pub fn checked_add(self, other: Money) -> Result<Money, MoneyError> {
        self.0
            .checked_add(other.0)
            .map(Money)
            .ok_or(MoneyError::Overflow)
    }
}

impl fmt::Display for Money {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let sign = if self.0 < 0 { "-" } else { "" };
        let abs = self.0.unsigned_abs();
        write!(f, "{sign}{}.{:02}", abs / 100, abs % 100)
    }
}

impl FromStr for Money {
    type Err = MoneyError;

    /// Accepts `30`, `30.5`, `30.50` and a leading minus sign.
    fn from_str(s: &str) -> Result<Money, MoneyError> {
        let err = || MoneyError::Parse(s.to_owned());
        let (sign, body) = match s.strip_prefix('-') {
            Some(rest) => (-1i64, rest),
            None => (1i64, s),
        };
        if body.is_empty() {
            return Err(err());
        }
        let (whole, frac) = match body.split_once('.') {
            Some((w, f)) => (w, f),
            None => (body, ""),
        };
        if whole.is_empty() || frac.len() > 2 {
            return Err(err());
        }
        if !whole.bytes().all(|b| b.is_ascii_digit()) || !frac.bytes().all(|b| b.is_ascii_digit()) {
            return Err(err());
        }
        let whole: i64 = whole.parse().map_err(|_| err())?;
        let frac_cents = match frac.len() {
            0 => 0,
            1 => frac.parse::<i64>().map_err(|_| err())? * 10,
            _ => frac.parse::<i64>().map_err(|_| err())?,
        };
        let cents = whole
            .checked_mul(100)
            .and_then(|c| c.checked_add(frac_cents))
            .ok_or(MoneyError::Overflow)?;
        Ok(Money(sign * cents))
    }
}

impl Serialize for Money {
    fn serialize<S: serde::Serializer>(&self, s: S) -> Result<S::Ok, S::Error> {
        s.serialize_str(&self.to_string())
    }
}

impl<'de> Deserialize<'de> for Money {
    fn deserialize<D: serde::Deserializer<'de>>(d: D) -> Result<Self, D::Error> {
        struct V;
        impl serde::de::Visitor<'_> for V {
            type Value = Money;
            fn expecting(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
                f.write_str("a decimal money amount as string or number")
            }
            fn visit_str<E: serde::de::Error>(self, v: &str) -> Result<Money, E> {
                v.parse().map_err(E::custom)
            }
            fn visit_i64<E: serde::de::Error>(self, v: i64) -> Result<Money, E> {
                v.checked_mul(100)
                    .map(Money)
                    .ok_or_else(|| E::custom(MoneyError::Overflow))
            }
            fn visit_u64<E: serde::de::Error>(self, v: u64) -> Result<Money, E> {
                i64::try_from(v)
                    .ok()
                    .and_then(|v| v.checked_mul(100))
                    .map(Money)
                    .ok_or_else(|| E::custom(MoneyError::Overflow))
            }
            fn visit_f64<E: serde::de::Error>(self, v: f64) -> Result<Money, E> {
                // go through the shortest decimal text so 2.5 stays exact
                let text = format!("{v}");
                text.parse().map_err(E::custom)
            }
        }
        d.deserialize_any(V)
    }
}

/// A payload value: an amount, a list of amounts, or free text.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum PayloadValue {
    MoneyList(Vec<Money>),
    Money(Money),
    Text(String),
}

/// Key/value data carried by a thing.
pub type Payload = BTreeMap<String, PayloadValue>;

/// Total cost of ordered items plus their shipping costs.
pub fn billing_total(item_costs: &[Money], shipping_costs: Money) -> Result<Money, MoneyError> {
    if shipping_costs.is_negative() {
        return Err(MoneyError::Negative(shipping_costs));
    }
    let mut total = Money::ZERO;
    for &item in item_costs {
        if item.is_negative() {
            return Err(MoneyError::Negative(item));
        }
        total = total.checked_add(item)?;
    }
    total.checked_add(shipping_costs)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn m(s: &str) -> Money {
        s.parse().unwrap()
    }

    #[test]
    fn money_parse_and_display() {
        assert_eq!(m("30").cents(), 3000);
        assert_eq!(m("2.5").cents(), 250);
        assert_eq!(m("2.50").cents(), 250);
        assert_eq!(m("0").cents(), 0);
        assert_eq!(m("-1.25").cents(), -125);
        assert_eq!(m("7.5").to_string(), "7.50");
        assert_eq!(m("60").to_string(), "60.00");
        assert!("".parse::<Money>().is_err());
        assert!("1.234".parse::<Money>().is_err());
        assert!("x".parse::<Money>().is_err());
    }

    #[test]
    fn money_json_forms() {
        assert_eq!(serde_json::from_str::<Money>("30").unwrap(), m("30"));
        assert_eq!(serde_json::from_str::<Money>("2.5").unwrap(), m("2.5"));
        assert_eq!(serde_json::from_str::<Money>("\"2.50\"").unwrap(), m("2.5"));
        assert_eq!(serde_json::to_string(&m("2.5")).unwrap(), "\"2.50\"");
    }

    #[test]
    fn billing_total_examples() {
        assert_eq!(
            billing_total(&[m("30"), m("20")], m("10")).unwrap(),
            m("60")
        );
        assert_eq!(billing_total(&[], Money::ZERO).unwrap(), Money::ZERO);
        assert_eq!(billing_total(&[m("5")], m("2.5")).unwrap(), m("7.5"));
        assert!(matches!(
            billing_total(&[m("-1")], Money::ZERO),
            Err(MoneyError::Negative(_))
        ));
        assert!(matches!(
            billing_total(&[], m("-0.01")),
            Err(MoneyError::Negative(_))
        ));
    }

    #[test]
    fn action_mode_law() {
        for action in [
            Action::Create,
            Action::Process,
            Action::Release,
            Action::Transfer,
            Action::Arrive,
            Action::Accept,
            Action::Trigger,
            Action::Bounce,
            Action::Settle,
        ] {
            let is_state = matches!(
                action,
                Action::Create | Action::Process | Action::Accept | Action::Settle
            );
            assert_eq!(action.mode() == Mode::State, is_state);
        }
    }

    #[test]
    fn record_field_order_is_stable() {
        let rec = TraceRecord {
            step: 3,
            thing: ThingId::new("t1"),
            thimac: ThimacId::new("Billing"),
            stage: StageId::new("Billing.process"),
            action: Action::Process,
            mode: Mode::State,
            case: None,
            config: None,
        };
        assert_eq!(
            serde_json::to_string(&rec).unwrap(),
            r#"{"step":3,"thing":"t1","thimac":"Billing","stage":"Billing.process","action":"process","mode":"state"}"#
        );
    }
}
