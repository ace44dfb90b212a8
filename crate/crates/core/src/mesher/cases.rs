//! Marching-cubes case table, generated rather than transcribed.
//!
//! Corner `c` of a cell sits at offset `(c & 1, (c >> 1) & 1, (c >> 2) & 1)`.
//! For each of the 256 inside/outside patterns the surface is assembled face
//! by face: on every cell face, each run of consecutive solid corners is cut
//! off by one segment between the two crossed edges that bound the run. Faces
//! with two diagonal solid corners therefore always separate them. Since the
//! two cells sharing a face derive the same segments (traversed in opposite
//! directions), neighboring cells always agree and closed fields give closed,
//! consistently oriented surfaces.

use std::sync::OnceLock;

/// Corner pairs of the 12 cell edges: x-edges, then y-edges, then z-edges.
pub const EDGES: [(usize, usize); 12] = [
    (0, 1),
    (2, 3),
    (4, 5),
    (6, 7),
    (0, 2),
    (1, 3),
    (4, 6),
    (5, 7),
    (0, 4),
    (1, 5),
    (2, 6),
    (3, 7),
];

/// Cell faces with corners counter-clockwise as seen from outside the cell.
pub const FACES: [[usize; 4]; 6] = [
    [0, 2, 3, 1], // z = 0
    [4, 5, 7, 6], // z = 1
    [0, 1, 5, 4], // y = 0
    [2, 6, 7, 3], // y = 1
    [0, 4, 6, 2], // x = 0
    [1, 3, 7, 5], // x = 1
];

pub fn corner_offset(c: usize) -> [usize; 3] {
    [c & 1, (c >> 1) & 1, (c >> 2) & 1]
}

fn edge_between(a: usize, b: usize) -> usize {
    let (a, b) = if a < b { (a, b) } else { (b, a) };
    EDGES
        .iter()
        .position(|&e| e == (a, b))
        .expect("face corners are adjacent")
}

/// Closed polygons (as edge indices) for one corner pattern. Bit `c` of
/// `case` is set when corner `c` is solid. Vertices run counter-clockwise
/// around the normal that points from solid to empty.
pub fn loops_for_case(case: u8) -> Vec<Vec<u8>> {
    let solid = |c: usize| case & (1 << c) != 0;

    let mut next = [None::<usize>; 12];
    for face in FACES {
        for start in 0..4 {
            let prev = (start + 3) % 4;
            if !solid(face[start]) || solid(face[prev]) {
                continue;
            }
            let mut end = start;
            while solid(face[(end + 1) % 4]) {
                end = (end + 1) % 4;
            }
            let entry = edge_between(face[prev], face[start]);
            let exit = edge_between(face[end], face[(end + 1) % 4]);
            debug_assert!(next[entry].is_none());
            next[entry] = Some(exit);
        }
    }

    let mut seen = [false; 12];
    let mut loops = Vec::new();
    for first in 0..12 {
        if seen[first] || next[first].is_none() {
            continue;
        }
        let mut poly = Vec::new();
        let mut e = first;
        while !seen[e] {
            seen[e] = true;
            poly.push(e as u8);
            e = next[e].expect("every crossed edge is entered and left once");
        }
        debug_assert_eq!(e, first);
        loops.push(poly);
    }
    loops
}

pub fn table() -> &'static [Vec<Vec<u8>>] {
    static TABLE: OnceLock<Vec<Vec<Vec<u8>>>> = OnceLock::new();
    TABLE.get_or_init(|| (0..=255u8).map(loops_for_case).collect())
}
