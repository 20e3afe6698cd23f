//! Probabilistic value-passing process calculus: terms, parsing, and the
//! reactive operational semantics.

mod error;
mod parse;
mod process;
mod semantics;
mod value;

pub use error::{EvalError, ParseError, ProcessError, SemanticsError};
pub use parse::{parse_definitions, parse_process};
pub use process::{
    canonical, substitute, ActionLabel, DefinitionEnv, Prefix, Prob, Process, SumGroup, EPS_SUM,
};
pub use semantics::{derive_transitions, mu, Stimuli, Transition};
pub use value::{BoolExpr, Value, ValueExpr};

#[cfg(test)]
mod tests {
    use std::collections::BTreeSet;

    use super::*;

    fn parse(text: &str) -> Process {
        parse_process(text, &DefinitionEnv::new()).expect("parse")
    }

    #[test]
    fn parses_nil() {
        assert_eq!(parse("Nil"), Process::Nil);
    }

    #[test]
    fn parses_grouped_summation() {
        let p = parse("[0.2]alpha.P1 + [0.8]alpha.P2 + [1]beta.P3");
        match p {
            Process::Sum(groups) => {
                assert_eq!(groups.len(), 2);
                assert_eq!(
                    groups[0].prefix,
                    Prefix::Output {
                        chan: "alpha".into(),
                        arg: None
                    }
                );
                assert_eq!(groups[0].branches.len(), 2);
                assert_eq!(groups[0].branches[0].0.into_inner(), 0.2);
                assert_eq!(groups[0].branches[1].0.into_inner(), 0.8);
                assert_eq!(groups[1].branches.len(), 1);
            }
            other => panic!("expected summation, got {other:?}"),
        }
    }

    #[test]
    fn rejects_probability_deficit() {
        let err = parse_process("[0.5]alpha.P1 + [0.4]alpha.P2", &DefinitionEnv::new())
            .expect_err("0.9 must be rejected");
        assert!(matches!(
            err,
            ParseError::Invalid {
                source: ProcessError::ProbabilitySum { .. },
                ..
            }
        ));
    }

    #[test]
    fn rejects_duplicate_prefix_across_groups() {
        let err = parse_process(
            "[0.5]alpha.P1 + [1]beta.P2 + [0.5]alpha.P3",
            &DefinitionEnv::new(),
        )
        .expect_err("non-adjacent alpha group is a duplicate");
        assert!(matches!(
            err,
            ParseError::Invalid {
                source: ProcessError::DuplicatePrefix(_),
                ..
            }
        ));
    }

    #[test]
    fn parses_fractions_in_brackets() {
        let p = parse("[1/3]a.P + [2/3]a.Q");
        match p {
            Process::Sum(groups) => {
                assert!((groups[0].branches[0].0.into_inner() - 1.0 / 3.0).abs() < 1e-15);
            }
            _ => panic!(),
        }
    }

    #[test]
    fn print_parse_roundtrip_on_nested_term() {
        let text = "(a(x).'b(x).Nil | [0.5]'a(7).P + [0.5]'a(7).Q + beta.R)\\{a,b}";
        let p = parse(text);
        let printed = format!("{p}");
        let reparsed = parse(&printed);
        assert_eq!(p, reparsed);
    }

    #[test]
    fn substitute_missing_variable_is_identity() {
        let p = parse("Nil");
        assert_eq!(substitute(&p, "x", &ValueExpr::Lit(Value::Int(3))), p);
    }

    #[test]
    fn substitute_free_occurrence() {
        let p = parse("'a(x).Nil");
        // `x` is unbound in this term, so it parses as a Name constant;
        // build the open term programmatically instead.
        let open = Process::prefix(
            Prefix::Output {
                chan: "a".into(),
                arg: Some(ValueExpr::var("x")),
            },
            Process::Nil,
        );
        let _ = p;
        let subst = substitute(&open, "x", &ValueExpr::Lit(Value::name("u1")));
        assert_eq!(
            subst,
            Process::prefix(
                Prefix::Output {
                    chan: "a".into(),
                    arg: Some(ValueExpr::Lit(Value::name("u1"))),
                },
                Process::Nil,
            )
        );
    }

    #[test]
    fn substitute_respects_rebinding() {
        // In a(x).'b(x).Nil the input prefix rebinds x, so substitution is
        // the identity.
        let p = parse("a(x).'b(x).Nil");
        let subst = substitute(&p, "x", &ValueExpr::Lit(Value::name("u1")));
        assert_eq!(subst, p);
    }

    #[test]
    fn output_transition_on_singleton_sum() {
        let p = parse("'a(5).Nil");
        let ts = derive_transitions(&p, &DefinitionEnv::new(), &Stimuli::none()).unwrap();
        assert_eq!(ts.len(), 1);
        assert_eq!(ts[0].label, ActionLabel::output("a", Value::Int(5)));
        assert_eq!(ts[0].prob, 1.0);
        assert_eq!(ts[0].target, Process::Nil);
    }

    #[test]
    fn communication_is_restricted_tau_with_substitution() {
        let p = parse("(a(x).'c(x).Nil | 'a(7).Nil)\\{a}");
        let ts = derive_transitions(&p, &DefinitionEnv::new(), &Stimuli::none()).unwrap();
        assert_eq!(ts.len(), 1, "only the communication survives restriction");
        assert_eq!(ts[0].label, ActionLabel::Tau);
        assert_eq!(ts[0].prob, 1.0);
        let expected = parse("('c(7).Nil | Nil)\\{a}");
        assert_eq!(ts[0].target, expected);
    }

    #[test]
    fn false_guard_selects_else_branch() {
        let p = parse("if false then P else 'a(1).Nil");
        let ts = derive_transitions(&p, &DefinitionEnv::new(), &Stimuli::none()).unwrap();
        assert_eq!(ts.len(), 1);
        assert_eq!(ts[0].label, ActionLabel::output("a", Value::Int(1)));
        assert_eq!(ts[0].target, Process::Nil);
    }

    #[test]
    fn mu_sums_branch_mass_per_class() {
        let env = parse_definitions("P1 = Nil; P2 = Nil; P3 = Nil").unwrap();
        let p = parse("[0.2]alpha.P1 + [0.8]alpha.P2 + [1]beta.P3");
        let alpha = ActionLabel::Out {
            chan: "alpha".into(),
            value: None,
        };
        let class1: BTreeSet<Process> = [Process::call("P1", vec![])].into_iter().collect();
        let m = mu(&p, &alpha, &class1, &env, &Stimuli::none()).unwrap();
        assert!((m - 0.2).abs() < 1e-12);

        let class12: BTreeSet<Process> =
            [Process::call("P1", vec![]), Process::call("P2", vec![])]
                .into_iter()
                .collect();
        let m = mu(&p, &alpha, &class12, &env, &Stimuli::none()).unwrap();
        assert!((m - 1.0).abs() < 1e-12);
    }

    #[test]
    fn mu_of_nil_is_zero() {
        let class: BTreeSet<Process> = [Process::Nil].into_iter().collect();
        let m = mu(
            &Process::Nil,
            &ActionLabel::Tau,
            &class,
            &DefinitionEnv::new(),
            &Stimuli::none(),
        )
        .unwrap();
        assert_eq!(m, 0.0);
    }

    #[test]
    fn canonical_drops_nil_and_resolves_guards() {
        let p = parse("(Nil | 'a(1).Nil)\\{b}");
        let c = canonical(&p);
        assert_eq!(c, parse("('a(1).Nil)\\{b}"));

        let p = parse("if 1=1 then 'a(1).Nil else Nil");
        assert_eq!(canonical(&p), parse("'a(1).Nil"));
    }

    #[test]
    fn canonical_identifies_alpha_equivalent_terms() {
        let p = parse("a(x).'b(x).Nil");
        let q = parse("a(y).'b(y).Nil");
        assert_ne!(p, q);
        assert_eq!(canonical(&p), canonical(&q));
    }

    #[test]
    fn undefined_identifier_is_reported() {
        let p = parse("Missing(1)");
        let err = derive_transitions(&p, &DefinitionEnv::new(), &Stimuli::none()).unwrap_err();
        assert!(matches!(err, SemanticsError::UndefinedIdentifier(_)));
    }

    #[test]
    fn input_stimulus_instantiates_bound_variable() {
        let p = parse("a(x).'b(x).Nil");
        let stim = Stimuli::uniform([Value::Int(4), Value::Int(9)]);
        let ts = derive_transitions(&p, &DefinitionEnv::new(), &stim).unwrap();
        assert_eq!(ts.len(), 2);
        assert!(ts
            .iter()
            .any(|t| t.label == ActionLabel::input("a", Value::Int(4))
                && t.target == parse("'b(4).Nil")));
    }
}
