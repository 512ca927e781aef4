//! JSON maps keyed by time, state and action labels, in index order.

use serde::ser::{Serialize, SerializeMap, Serializer};

use crate::model::{Distribution, FiniteSpace, KernelTable, MarkovPolicy};

pub(crate) struct Keyed<'a, T> {
    pub keys: &'a [String],
    pub values: Vec<T>,
}

impl<T: Serialize> Serialize for Keyed<'_, T> {
    fn serialize<S: Serializer>(&self, serializer: S) -> std::result::Result<S::Ok, S::Error> {
        let mut map = serializer.serialize_map(Some(self.values.len()))?;
        for (k, v) in self.keys.iter().zip(&self.values) {
            map.serialize_entry(k, v)?;
        }
        map.end()
    }
}

pub(crate) fn time_keys(horizon: usize) -> Vec<String> {
    (0..horizon).map(|t| t.to_string()).collect()
}

pub(crate) fn law<'a>(space: &'a FiniteSpace, d: &'a Distribution) -> Keyed<'a, f64> {
    Keyed {
        keys: space.labels(),
        values: d.weights().to_vec(),
    }
}

pub(crate) fn laws<'a>(times: &'a [String], space: &'a FiniteSpace, ds: &'a [Distribution]) -> Keyed<'a, Keyed<'a, f64>> {
    Keyed {
        keys: times,
        values: ds.iter().map(|d| law(space, d)).collect(),
    }
}

/// `table[t][s]` → `{t: {s: value}}`.
pub(crate) fn by_state<'a>(times: &'a [String], states: &'a FiniteSpace, table: &'a [Vec<f64>]) -> Keyed<'a, Keyed<'a, f64>> {
    Keyed {
        keys: times,
        values: table
            .iter()
            .map(|row| Keyed {
                keys: states.labels(),
                values: row.clone(),
            })
            .collect(),
    }
}

/// `table[t][s][a]` → `{t: {s: {a: value}}}`.
pub(crate) fn by_state_action<'a>(
    times: &'a [String],
    states: &'a FiniteSpace,
    actions: &'a FiniteSpace,
    table: &'a [Vec<Vec<f64>>],
) -> Keyed<'a, Keyed<'a, Keyed<'a, f64>>> {
    Keyed {
        keys: times,
        values: table
            .iter()
            .map(|step| Keyed {
                keys: states.labels(),
                values: step
                    .iter()
                    .map(|row| Keyed {
                        keys: actions.labels(),
                        values: row.clone(),
                    })
                    .collect(),
            })
            .collect(),
    }
}

pub(crate) fn policy<'a>(
    times: &'a [String],
    states: &'a FiniteSpace,
    actions: &'a FiniteSpace,
    pi: &'a MarkovPolicy,
) -> Keyed<'a, Keyed<'a, Keyed<'a, f64>>> {
    Keyed {
        keys: times,
        values: pi
            .rows()
            .iter()
            .map(|step| Keyed {
                keys: states.labels(),
                values: step.iter().map(|d| law(actions, d)).collect(),
            })
            .collect(),
    }
}

/// `{t: {s: {a: {s': weight}}}}`.
pub(crate) fn kernel<'a>(
    times: &'a [String],
    states: &'a FiniteSpace,
    actions: &'a FiniteSpace,
    k: &'a KernelTable,
) -> Keyed<'a, Keyed<'a, Keyed<'a, Keyed<'a, f64>>>> {
    Keyed {
        keys: times,
        values: k
            .rows()
            .iter()
            .map(|step| Keyed {
                keys: states.labels(),
                values: step
                    .iter()
                    .map(|per_action| Keyed {
                        keys: actions.labels(),
                        values: per_action.iter().map(|d| law(states, d)).collect(),
                    })
                    .collect(),
            })
            .collect(),
    }
}
