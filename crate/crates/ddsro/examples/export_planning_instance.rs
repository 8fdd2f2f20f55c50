//! Dump the built-in synthetic planning instance as JSON (the schema used by
//! the CLI's --instance flag).

fn main() {
    let pi = ddsro::models::synthetic_planning_instance();
    println!("{}", serde_json::to_string_pretty(&pi).unwrap());
}
