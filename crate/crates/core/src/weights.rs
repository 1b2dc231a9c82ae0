//! Position weights of Tor's weighted-bandwidth path selection.
//!
//! Relays fall into four classes (see [`NodeClass`]). The directory
//! authorities publish seven weights that say how much of each class's
//! bandwidth is offered to each circuit position, chosen so that the entry,
//! middle and exit positions carry bandwidth as evenly as the network allows.
//! Which closed form applies depends on which classes are scarce relative to
//! a third of the total bandwidth; [`compute_weights`] walks those cases and
//! records every predicate it tested.
//!
//! Weight names follow the usual `W<position><class>` convention:
//! position `e`ntry, `n` middle, e`x`it; class `e` pure entry, `x` pure exit,
//! `d` entry-exit. Middle-only relays are always used at full weight for the
//! middle position and have no weight of their own.

use std::fmt;

use crate::consensus::{ClassBandwidths, NetworkState, NodeClass};
use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum WeightError {
    #[error("empty-network: total bandwidth is zero")]
    EmptyNetwork,
    #[error("degenerate-class: {case} divides by the {class} bandwidth, which is zero")]
    DegenerateClass { class: NodeClass, case: WeightCase },
    #[error(
        "unbalanceable: {case} yields {weight} = {value}, outside [0, 1]; the entry-exit \
         bandwidth is too small to bring the exit position up to a third of the total"
    )]
    Unbalanceable {
        case: WeightCase,
        weight: &'static str,
        value: f64,
    },
}

/// The branch of the weight algorithm that produced a [`WeightSet`].
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum WeightCase {
    Case1,
    Case2a,
    Case2b1,
    Case2b2,
    Case2b3,
    Case3a1,
    Case3a2,
    Case3b1,
    Case3b2,
}

impl WeightCase {
    pub const ALL: [WeightCase; 9] = [
        WeightCase::Case1,
        WeightCase::Case2a,
        WeightCase::Case2b1,
        WeightCase::Case2b2,
        WeightCase::Case2b3,
        WeightCase::Case3a1,
        WeightCase::Case3a2,
        WeightCase::Case3b1,
        WeightCase::Case3b2,
    ];

    pub fn label(self) -> &'static str {
        match self {
            WeightCase::Case1 => "Case1",
            WeightCase::Case2a => "Case2a",
            WeightCase::Case2b1 => "Case2b1",
            WeightCase::Case2b2 => "Case2b2",
            WeightCase::Case2b3 => "Case2b3",
            WeightCase::Case3a1 => "Case3a1",
            WeightCase::Case3a2 => "Case3a2",
            WeightCase::Case3b1 => "Case3b1",
            WeightCase::Case3b2 => "Case3b2",
        }
    }
}

impl fmt::Display for WeightCase {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.label())
    }
}

/// The seven position weights, each in `[0, 1]`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct WeightSet {
    /// Pure entry relay in the entry position.
    pub wee: f64,
    /// Entry-exit relay in the entry position.
    pub wed: f64,
    /// Entry-exit relay in the middle position.
    pub wnd: f64,
    /// Entry-exit relay in the exit position.
    pub wxd: f64,
    /// Pure entry relay in the middle position.
    pub wne: f64,
    /// Pure exit relay in the middle position.
    pub wnx: f64,
    /// Pure exit relay in the exit position.
    pub wxx: f64,
    pub case: WeightCase,
}

impl WeightSet {
    /// `(name, value)` pairs in a stable display order.
    pub fn named(&self) -> [(&'static str, f64); 7] {
        [
            ("Wee", self.wee),
            ("Wed", self.wed),
            ("Wnd", self.wnd),
            ("Wxd", self.wxd),
            ("Wne", self.wne),
            ("Wnx", self.wnx),
            ("Wxx", self.wxx),
        ]
    }

    /// Bandwidth offered to each circuit position under these weights.
    pub fn position_bandwidths(&self, b: &ClassBandwidths) -> PositionBandwidths {
        PositionBandwidths {
            entry: self.wee * b.pure_entry + self.wed * b.entry_exit,
            middle: b.neither
                + self.wne * b.pure_entry
                + self.wnd * b.entry_exit
                + self.wnx * b.pure_exit,
            exit: self.wxx * b.pure_exit + self.wxd * b.entry_exit,
        }
    }

    fn first_out_of_range(&self) -> Option<(&'static str, f64)> {
        self.named()
            .into_iter()
            .find(|&(_, v)| !(0.0..=1.0).contains(&v))
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PositionBandwidths {
    pub entry: f64,
    pub middle: f64,
    pub exit: f64,
}

/// Every comparison the algorithm made on its way to a case.
///
/// Tests that were never reached are `None`.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct CasePredicates {
    /// `B_e >= B/3`
    pub entry_at_least_third: bool,
    /// `B_x >= B/3`
    pub exit_at_least_third: bool,
    /// `R + B_d < S` (Case 2)
    pub scarcer_plus_ee_below_less_scarce: Option<bool>,
    /// `B_x < B_e`, choosing where Case 2a puts the entry-exit relays.
    pub exit_below_entry: Option<bool>,
    /// `B_n <= B/3` (Case 2b)
    pub neither_at_most_third: Option<bool>,
    /// Case 2b1 produced a weight outside `[0, 1]`.
    pub out_of_range_fallback: Option<bool>,
    /// scarce class `+ B_d < B/3` (Case 3)
    pub scarce_plus_ee_below_third: Option<bool>,
    /// `B_e < B_x` (Case 3)
    pub entry_below_exit: Option<bool>,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CaseEvaluation {
    /// The smaller of the pure entry and pure exit bandwidths.
    pub scarcer: f64,
    /// The larger of the pure entry and pure exit bandwidths.
    pub less_scarce: f64,
    pub third: f64,
    pub predicates: CasePredicates,
}

/// Computes the weights for a parsed network.
pub fn compute_weights(state: &NetworkState) -> Result<(WeightSet, CaseEvaluation), WeightError> {
    compute_class_weights(state.bandwidths())
}

/// Computes the weights from class aggregates alone.
pub fn compute_class_weights(
    b: &ClassBandwidths,
) -> Result<(WeightSet, CaseEvaluation), WeightError> {
    let total = b.total;
    if total.is_nan() || total <= 0.0 {
        return Err(WeightError::EmptyNetwork);
    }
    let (e, x, d, n) = (b.pure_entry, b.pure_exit, b.entry_exit, b.neither);
    let third = total / 3.0;
    let mut p = CasePredicates {
        entry_at_least_third: e >= third,
        exit_at_least_third: x >= third,
        ..CasePredicates::default()
    };
    let mut eval = CaseEvaluation {
        scarcer: e.min(x),
        less_scarce: e.max(x),
        third,
        predicates: p,
    };

    let weights = if p.entry_at_least_third && p.exit_at_least_third {
        case1(e, x, d, n)?
    } else if !p.entry_at_least_third && !p.exit_at_least_third {
        let (r, s) = (eval.scarcer, eval.less_scarce);
        let split = r + d < s;
        p.scarcer_plus_ee_below_less_scarce = Some(split);
        if split {
            p.exit_below_entry = Some(x < e);
            case2a(x < e)
        } else {
            let middle_scarce = n <= third;
            p.neither_at_most_third = Some(middle_scarce);
            if middle_scarce {
                let first = case2b1(e, x, d, n);
                let fallback = first.first_out_of_range().is_some();
                p.out_of_range_fallback = Some(fallback);
                if fallback {
                    case2b2(e, x, d, n)?
                } else {
                    first
                }
            } else {
                case2b3(e, x, d, n)?
            }
        }
    } else {
        let entry_scarce = e < x;
        let scarce = e.min(x);
        let tight = scarce + d < third;
        p.scarce_plus_ee_below_third = Some(tight);
        p.entry_below_exit = Some(entry_scarce);
        match (tight, entry_scarce) {
            (true, true) => case3a1(x, n)?,
            (true, false) => case3a2(e, n)?,
            (false, true) => case3b1(e, x, d, n)?,
            (false, false) => case3b2(e, x, d, n)?,
        }
    };
    eval.predicates = p;

    if let Some((weight, value)) = weights.first_out_of_range() {
        return Err(WeightError::Unbalanceable {
            case: weights.case,
            weight,
            value,
        });
    }
    Ok((weights, eval))
}

fn require(value: f64, class: NodeClass, case: WeightCase) -> Result<f64, WeightError> {
    if value > 0.0 {
        Ok(value)
    } else {
        Err(WeightError::DegenerateClass { class, case })
    }
}

fn case1(e: f64, x: f64, d: f64, n: f64) -> Result<WeightSet, WeightError> {
    let case = WeightCase::Case1;
    let x_ = require(x, NodeClass::PureExit, case)?;
    let e_ = require(e, NodeClass::PureEntry, case)?;
    let _ = d;
    let wxx = (e + n + x) / (3.0 * x_);
    let wne = (2.0 * e - x - n) / (3.0 * e_);
    Ok(WeightSet {
        wed: 1.0 / 3.0,
        wnd: 1.0 / 3.0,
        wxd: 1.0 / 3.0,
        wxx,
        wnx: 1.0 - wxx,
        wne,
        wee: 1.0 - wne,
        case,
    })
}

fn case2a(exit_below_entry: bool) -> WeightSet {
    // Entry-exit relays all go to whichever of entry/exit is scarcer.
    let (wxd, wed) = if exit_below_entry { (1.0, 0.0) } else { (0.0, 1.0) };
    WeightSet {
        wee: 1.0,
        wxx: 1.0,
        wne: 0.0,
        wnx: 0.0,
        wnd: 0.0,
        wxd,
        wed,
        case: WeightCase::Case2a,
    }
}

/// Evaluated without a zero check: a zero divisor gives a non-finite weight,
/// which the caller treats as out of range.
fn case2b1(e: f64, x: f64, d: f64, n: f64) -> WeightSet {
    let wxd = (d - 2.0 * x + 4.0 * e - 2.0 * n) / (3.0 * d);
    let shared = (1.0 - wxd) / 2.0;
    WeightSet {
        wxx: (x - e + n) / x,
        wxd,
        wnx: (e - n) / x,
        wne: 0.0,
        wee: 1.0,
        wnd: shared,
        wed: shared,
        case: WeightCase::Case2b1,
    }
}

fn case2b2(e: f64, x: f64, d: f64, n: f64) -> Result<WeightSet, WeightError> {
    let case = WeightCase::Case2b2;
    let d_ = require(d, NodeClass::EntryExit, case)?;
    let wxd = (d - 2.0 * x + e + n) / (3.0 * d_);
    let wnd = (d - 2.0 * n + e + x) / (3.0 * d_);
    Ok(WeightSet {
        wee: 1.0,
        wxx: 1.0,
        wne: 0.0,
        wnx: 0.0,
        wxd,
        wnd,
        wed: 1.0 - wxd - wnd,
        case,
    })
}

fn case2b3(e: f64, x: f64, d: f64, n: f64) -> Result<WeightSet, WeightError> {
    let case = WeightCase::Case2b3;
    let d_ = require(d, NodeClass::EntryExit, case)?;
    let wxd = (d - 2.0 * x + e + n) / (3.0 * d_);
    Ok(WeightSet {
        wee: 1.0,
        wxx: 1.0,
        wne: 0.0,
        wnx: 0.0,
        wnd: 0.0,
        wxd,
        wed: 1.0 - wxd,
        case,
    })
}

fn case3a1(x: f64, n: f64) -> Result<WeightSet, WeightError> {
    let case = WeightCase::Case3a1;
    let wnx = if x < n {
        0.0
    } else {
        (x - n) / (2.0 * require(x, NodeClass::PureExit, case)?)
    };
    Ok(WeightSet {
        wee: 1.0,
        wed: 1.0,
        wnd: 0.0,
        wxd: 0.0,
        wne: 0.0,
        wnx,
        wxx: 1.0 - wnx,
        case,
    })
}

fn case3a2(e: f64, n: f64) -> Result<WeightSet, WeightError> {
    let case = WeightCase::Case3a2;
    let wne = if e < n {
        0.0
    } else {
        (e - n) / (2.0 * require(e, NodeClass::PureEntry, case)?)
    };
    Ok(WeightSet {
        wxx: 1.0,
        wxd: 1.0,
        wnd: 0.0,
        wed: 0.0,
        wnx: 0.0,
        wne,
        wee: 1.0 - wne,
        case,
    })
}

fn case3b1(e: f64, x: f64, d: f64, n: f64) -> Result<WeightSet, WeightError> {
    let case = WeightCase::Case3b1;
    let d_ = require(d, NodeClass::EntryExit, case)?;
    let x_ = require(x, NodeClass::PureExit, case)?;
    let wed = (d - 2.0 * e + x + n) / (3.0 * d_);
    let wxx = (x + n) / (2.0 * x_);
    let shared = (1.0 - wed) / 2.0;
    Ok(WeightSet {
        wee: 1.0,
        wne: 0.0,
        wed,
        wxx,
        wnx: 1.0 - wxx,
        wxd: shared,
        wnd: shared,
        case,
    })
}

fn case3b2(e: f64, x: f64, d: f64, n: f64) -> Result<WeightSet, WeightError> {
    let case = WeightCase::Case3b2;
    let d_ = require(d, NodeClass::EntryExit, case)?;
    let e_ = require(e, NodeClass::PureEntry, case)?;
    let wxd = (d - 2.0 * x + e + n) / (3.0 * d_);
    let wee = (e + n) / (2.0 * e_);
    let shared = (1.0 - wxd) / 2.0;
    Ok(WeightSet {
        wxx: 1.0,
        wnx: 0.0,
        wxd,
        wee,
        wne: 1.0 - wee,
        wed: shared,
        wnd: shared,
        case,
    })
}
