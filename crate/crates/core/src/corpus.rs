//! The bundled model corpus (also shipped as files under `fixtures/`),
//! plus a generator for hidden-Markov-chain models of arbitrary length.

/// A bundled model with optional data and a note on expected behaviour.
#[derive(Debug, Clone, Copy)]
pub struct Fixture {
    pub name: &'static str,
    pub source: &'static str,
    pub data_json: Option<&'static str>,
    pub note: &'static str,
}

pub const COINS: Fixture = Fixture {
    name: "coins",
    source: include_str!("../../../fixtures/coins.slic"),
    data_json: None,
    note: include_str!("../../../fixtures/coins.md"),
};

pub const FUNNEL: Fixture = Fixture {
    name: "funnel",
    source: include_str!("../../../fixtures/funnel.slic"),
    data_json: None,
    note: include_str!("../../../fixtures/funnel.md"),
};

pub const BANANA: Fixture = Fixture {
    name: "banana",
    source: include_str!("../../../fixtures/banana.slic"),
    data_json: None,
    note: include_str!("../../../fixtures/banana.md"),
};

pub const EIGHT_SCHOOLS: Fixture = Fixture {
    name: "eight_schools",
    source: include_str!("../../../fixtures/eight_schools.slic"),
    data_json: Some(include_str!("../../../fixtures/eight_schools.data.json")),
    note: include_str!("../../../fixtures/eight_schools.md"),
};

pub const GUARD: Fixture = Fixture {
    name: "guard",
    source: include_str!("../../../fixtures/guard.slic"),
    data_json: Some(include_str!("../../../fixtures/guard.data.json")),
    note: include_str!("../../../fixtures/guard.md"),
};

pub const THREE_LINER: Fixture = Fixture {
    name: "three_liner",
    source: include_str!("../../../fixtures/three_liner.slic"),
    data_json: None,
    note: include_str!("../../../fixtures/three_liner.md"),
};

pub const SHRED_VIOLATION: Fixture = Fixture {
    name: "shred_violation",
    source: include_str!("../../../fixtures/shred_violation.slic"),
    data_json: None,
    note: include_str!("../../../fixtures/shred_violation.md"),
};

pub const CONJUGATE: Fixture = Fixture {
    name: "conjugate",
    source: include_str!("../../../fixtures/conjugate.slic"),
    data_json: Some(include_str!("../../../fixtures/conjugate.data.json")),
    note: include_str!("../../../fixtures/conjugate.md"),
};

pub const HMM3: Fixture = Fixture {
    name: "hmm3",
    source: include_str!("../../../fixtures/hmm3.slic"),
    data_json: Some(include_str!("../../../fixtures/hmm3.data.json")),
    note: include_str!("../../../fixtures/hmm3.md"),
};

/// Every bundled fixture.
pub fn fixtures() -> Vec<Fixture> {
    vec![
        COINS,
        FUNNEL,
        BANANA,
        EIGHT_SCHOOLS,
        GUARD,
        THREE_LINER,
        SHRED_VIOLATION,
        CONJUGATE,
        HMM3,
    ]
}

/// Binary hidden Markov chain of length `n`, written with scalar states:
/// `z1 ~ bernoulli(alpha[1])`, `zk ~ bernoulli(alpha[z(k-1) + 1])`,
/// `y[k] ~ bernoulli(beta[zk + 1])`.
pub fn hmm_source(n: usize) -> String {
    let mut s = String::new();
    s.push_str("data real[2] alpha;\ndata real[2] beta;\n");
    s.push_str(&format!("data int[{n}] y;\n"));
    for k in 1..=n {
        if k == 1 {
            s.push_str("int<lower=0,upper=1> z1 ~ bernoulli(alpha[1]);\n");
        } else {
            s.push_str(&format!(
                "int<lower=0,upper=1> z{k} ~ bernoulli(alpha[z{} + 1]);\n",
                k - 1
            ));
        }
    }
    for k in 1..=n {
        s.push_str(&format!("y[{k}] ~ bernoulli(beta[z{k} + 1]);\n"));
    }
    s
}

/// JSON data for [`hmm_source`].
pub fn hmm_data_json(alpha: [f64; 2], beta: [f64; 2], y: &[i64]) -> String {
    format!(
        r#"{{"alpha": [{}, {}], "beta": [{}, {}], "y": [{}]}}"#,
        alpha[0],
        alpha[1],
        beta[0],
        beta[1],
        y.iter()
            .map(|v| v.to_string())
            .collect::<Vec<_>>()
            .join(", ")
    )
}
