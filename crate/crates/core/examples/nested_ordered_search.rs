//! Builds ordered search, its hidden-symbol variant and a nested composition,
//! then prints a few instances and the detected search structure.

use tarski_adversary::problems::{detect_search_labeling, make_hsos, make_nos, make_os};

fn main() {
    let os = make_os(4).unwrap();
    println!(
        "{}: {} instances of length {}",
        os.name,
        os.instances.len(),
        os.length
    );
    for x in 0..os.instances.len() {
        println!("  {}", os.render(x));
    }

    let hs = make_hsos(3).unwrap();
    println!("{}: {} instances", hs.name, hs.instances.len());
    for x in 0..hs.instances.len().min(6) {
        println!("  {}", hs.render(x));
    }
    match detect_search_labeling(&hs) {
        Some(l) => println!("  search labeling with {} symbols", l.symbols()),
        None => println!("  not a search problem"),
    }

    let nos = make_nos(2, 3).unwrap();
    println!(
        "{}: {} instances, blocks {:?}",
        nos.name,
        nos.instances.len(),
        nos.blocks
    );
    for x in [0, nos.instances.len() / 2, nos.instances.len() - 1] {
        println!("  {}", nos.render(x));
    }
    let i = 4;
    let (p, q) = nos.block_of(i);
    println!("  position {i} is entry {q} of block {p}");
}
