//! Exact set match against execution match on the employees table.
//!
//!     cargo run -p sqlclarify --example exact_and_execution_match

use sqlclarify::eval::{execution_match, ExecutionBackend, SqliteBackend};
use sqlclarify::source::load_fixtures;
use sqlclarify::sql::{exact_set_match, tokenize_sql};

fn main() {
    let inst = load_fixtures(concat!(env!("CARGO_MANIFEST_DIR"), "/fixtures/fig3.json")).unwrap().remove(0);
    let mut db = SqliteBackend::new(&inst.schema, inst.database.as_ref()).unwrap();

    let gold = "SELECT employee_id, name FROM employees WHERE join_date > '2020-01-01' AND department = 'sales'";
    let preds = [
        "SELECT name, employee_id FROM employees WHERE department = 'sales' AND join_date > '2020-01-01'",
        "SELECT employee_id, name FROM employees WHERE join_date >= '2021-01-01' AND department = 'sales'",
        "SELECT employee_id, name FROM employees WHERE join_date > '2020-12-31' AND department = 'sales'",
        "SELECT employee_id, name FROM employees WHERE department IN ('sales', 'marketing')",
        "SELECT employee_id, nickname FROM employees",
    ];
    let g = tokenize_sql(gold).unwrap();
    println!("gold: {gold}\n");
    for p in preds {
        let exact = exact_set_match(&tokenize_sql(p).unwrap(), &g);
        let exec = match execution_match(p, gold, &mut db) {
            Ok(m) => m.to_string(),
            Err(e) => format!("error ({e})"),
        };
        println!("{p}\n    exact={exact}  execution={exec}");
    }

    let table = db.execute(gold).unwrap();
    println!("\ngold result: {:?}", table.columns);
    for row in &table.rows {
        println!("    {row:?}");
    }
}
