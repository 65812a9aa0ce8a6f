//! Exact reference computations on small finite CMDPs: per-context values by
//! linear solves, the context-marginal value identity and the asymmetric
//! policy-gradient form, each cross-checked by an independent route.

pub mod tabular;
pub mod theorems;

pub use tabular::{
    objective, objective_of_logits, value_iteration, value_marginal, value_per_context, ContextValues,
    MarginalValues, PolicyTable, TabularCMDP, TabularPolicy,
};
pub use theorems::{
    advantages, check_theorem1, check_theorem2, context_dependent_policy, exact_policy_gradient,
    finite_difference_gradient, implicit_gradient, marginal_q_gradient, max_relative_error, random_instance,
    Advantages, McOptions, Theorem1Report, Theorem2Report,
};
