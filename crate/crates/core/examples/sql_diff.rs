//! Splits candidate queries into clauses and lists where they diverge.
//!
//!     cargo run -p sqlclarify --example sql_diff -- "SELECT a FROM t" "SELECT b FROM t WHERE x > 1"

use sqlclarify::candidate::{CandidateDistribution, CandidateId};
use sqlclarify::clarify::render_question;
use sqlclarify::sql::{extract_decision_variables, tokenize_sql};

fn main() {
    let mut sqls: Vec<String> = std::env::args().skip(1).collect();
    if sqls.len() < 2 {
        sqls = vec![
            "SELECT name FROM employees WHERE join_date > '2020-12-31'".into(),
            "SELECT name FROM employees WHERE join_date >= '2020-12-31'".into(),
            "select NAME, salary from employees where join_date > '2020-12-31' order by salary desc".into(),
            "SELECT e.name FROM employees e JOIN departments d ON e.department = d.dept_name WHERE d.budget > 100".into(),
        ];
    }
    for sql in &sqls {
        match tokenize_sql(sql) {
            Ok(t) => {
                println!("{sql}");
                for seg in &t.segments {
                    println!("    {:<9} {:?}", seg.kind.to_string(), seg.elements);
                }
            }
            Err(e) => {
                eprintln!("cannot parse {sql:?}: {e}");
                std::process::exit(2);
            }
        }
    }

    let dist = CandidateDistribution::from_weighted(
        "diff",
        sqls.iter().enumerate().map(|(i, s)| (CandidateId(i as u32 + 1), s.as_str(), 1.0)),
    )
    .unwrap();
    let vars = extract_decision_variables(&dist);
    println!("\n{} decision variable(s)", vars.len());
    for v in &vars {
        let values: Vec<String> = dist.iter().map(|c| format!("{}={}", c.id, v.value_of(c.id))).collect();
        println!("{} {:?} at {}: {}", v.id, v.category, v.slot, values.join("  "));
        println!("    {}", render_question(v, "").text);
    }
}
