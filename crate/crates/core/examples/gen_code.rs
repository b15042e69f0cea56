//! Writes a random column-regular parity-check matrix in the bundled text format.
//!
//! cargo run --release -p turbonlc --example gen_code -- <n> <m> <col_weight> <seed> <out>

use turbonlc::LdpcCode;

fn main() {
    let args: Vec<String> = std::env::args().skip(1).collect();
    if args.len() != 5 {
        eprintln!("usage: gen_code <n> <m> <col_weight> <seed> <out>");
        std::process::exit(2);
    }
    let p = |i: usize| args[i].parse::<u64>().expect("integer argument");
    let (n, m, w) = (p(0) as usize, p(1) as usize, p(2) as usize);
    let mut seed = p(3);
    loop {
        let code = LdpcCode::random_regular(n, m, w, seed).expect("valid dimensions");
        if code.rank() == m {
            code.save(&args[4]).expect("writable output");
            println!("n={n} m={m} k={} seed={seed}", code.k());
            break;
        }
        eprintln!("seed {seed}: rank {} < {m}, retrying", code.rank());
        seed += 1;
    }
}
