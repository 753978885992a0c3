use serde::Serialize;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum State {
    Inside,
    Outside,
    Uncertain,
}

/// Three-valued membership result. `margin` is the distance of the decisive
/// quantity from its threshold after subtracting accumulated error; it is
/// positive exactly when the state is decided.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct Verdict {
    pub state: State,
    pub margin: f64,
}

impl Verdict {
    /// Inside if `inside_margin > 0`, else Outside if `outside_margin > 0`,
    /// else Uncertain carrying the larger (non-positive) of the two.
    pub fn decide(inside_margin: f64, outside_margin: f64) -> Self {
        if inside_margin > 0.0 {
            Verdict {
                state: State::Inside,
                margin: inside_margin,
            }
        } else if outside_margin > 0.0 {
            Verdict {
                state: State::Outside,
                margin: outside_margin,
            }
        } else {
            Verdict {
                state: State::Uncertain,
                margin: inside_margin.max(outside_margin),
            }
        }
    }

    pub fn is_inside(&self) -> bool {
        self.state == State::Inside
    }

    pub fn is_outside(&self) -> bool {
        self.state == State::Outside
    }

    pub fn is_uncertain(&self) -> bool {
        self.state == State::Uncertain
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn decided_states_have_positive_margin() {
        assert_eq!(Verdict::decide(0.1, -1.0).state, State::Inside);
        assert_eq!(Verdict::decide(-0.1, 0.2).state, State::Outside);
        let u = Verdict::decide(0.0, 0.0);
        assert_eq!(u.state, State::Uncertain);
        assert!(u.margin <= 0.0);
    }
}
