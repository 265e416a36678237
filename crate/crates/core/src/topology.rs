// SPDX-License-Identifier: Apache-2.0

//! Wired mesh construction, subnet tiling and wireless-interface placement.

use std::fmt::Write as _;

use crate::error::{Error, Result};

/// Cardinal direction of a wired mesh link, as seen from the sending switch.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum Direction {
    North,
    East,
    South,
    West,
}

impl Direction {
    pub const ALL: [Direction; 4] = [Direction::North, Direction::East, Direction::South, Direction::West];

    pub fn opposite(self) -> Direction {
        match self {
            Direction::North => Direction::South,
            Direction::East => Direction::West,
            Direction::South => Direction::North,
            Direction::West => Direction::East,
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct WiredLink {
    pub a: usize,
    pub b: usize,
    pub length_mm: f64,
}

/// A regular mesh with an optional subnet partition and one wireless
/// interface (WI) per subnet.
#[derive(Clone, Debug)]
pub struct Topology {
    pub rows: usize,
    pub cols: usize,
    pub die_edge_mm: f64,
    pub links: Vec<WiredLink>,
    /// Switch hosting each WI; the index is the WI's ring position and its subnet.
    pub wi_set: Vec<usize>,
    /// Subnet of every switch. Empty until `partition_and_place_wis`.
    pub subnet_of: Vec<usize>,
    /// Tile shape (rows, cols) of the subnet partition.
    pub tile: Option<(usize, usize)>,
}

impl Topology {
    /// Builds a `rows`×`cols` mesh on a square die. No WIs are placed.
    pub fn build_mesh(rows: usize, cols: usize, die_edge_mm: f64) -> Result<Self> {
        if rows < 2 || cols < 2 {
            return Err(Error::Topology(format!("mesh must be at least 2x2, got {rows}x{cols}")));
        }
        if !(die_edge_mm > 0.0 && die_edge_mm.is_finite()) {
            return Err(Error::Topology(format!("die edge must be positive, got {die_edge_mm}")));
        }
        let h_len = die_edge_mm / cols as f64;
        let v_len = die_edge_mm / rows as f64;
        let mut links = Vec::with_capacity(2 * rows * cols - rows - cols);
        for r in 0..rows {
            for c in 0..cols {
                let id = r * cols + c;
                if c + 1 < cols {
                    links.push(WiredLink { a: id, b: id + 1, length_mm: h_len });
                }
                if r + 1 < rows {
                    links.push(WiredLink { a: id, b: id + cols, length_mm: v_len });
                }
            }
        }
        Ok(Topology {
            rows,
            cols,
            die_edge_mm,
            links,
            wi_set: Vec::new(),
            subnet_of: Vec::new(),
            tile: None,
        })
    }

    pub fn num_switches(&self) -> usize {
        self.rows * self.cols
    }

    pub fn num_wis(&self) -> usize {
        self.wi_set.len()
    }

    pub fn coords(&self, id: usize) -> (usize, usize) {
        (id / self.cols, id % self.cols)
    }

    pub fn neighbor(&self, id: usize, dir: Direction) -> Option<usize> {
        let (r, c) = self.coords(id);
        match dir {
            Direction::North if r > 0 => Some(id - self.cols),
            Direction::South if r + 1 < self.rows => Some(id + self.cols),
            Direction::West if c > 0 => Some(id - 1),
            Direction::East if c + 1 < self.cols => Some(id + 1),
            _ => None,
        }
    }

    /// Direction from `a` to its mesh neighbor `b`.
    pub fn direction_to(&self, a: usize, b: usize) -> Option<Direction> {
        Direction::ALL.into_iter().find(|&d| self.neighbor(a, d) == Some(b))
    }

    pub fn link_length(&self, dir: Direction) -> f64 {
        match dir {
            Direction::East | Direction::West => self.die_edge_mm / self.cols as f64,
            Direction::North | Direction::South => self.die_edge_mm / self.rows as f64,
        }
    }

    /// WI ring index hosted at `switch`, if any.
    pub fn wi_at(&self, switch: usize) -> Option<usize> {
        self.wi_set.iter().position(|&s| s == switch)
    }

    /// Tiles the mesh into equal rectangular subnets of `subnet_size`
    /// switches and places one WI at a central switch of each tile.
    pub fn partition_and_place_wis(mut self, subnet_size: usize) -> Result<Self> {
        let n = self.num_switches();
        if subnet_size == 0 || n % subnet_size != 0 {
            return Err(Error::Topology(format!("subnet size {subnet_size} does not divide {n} switches")));
        }
        let (th, tw) = tile_shape(self.rows, self.cols, subnet_size).ok_or_else(|| {
            Error::Topology(format!(
                "subnet size {subnet_size} cannot tile a {}x{} mesh with rectangles",
                self.rows, self.cols
            ))
        })?;
        let tiles_per_row = self.cols / tw;
        let mut subnet_of = vec![0; n];
        for (id, s) in subnet_of.iter_mut().enumerate() {
            let (r, c) = (id / self.cols, id % self.cols);
            *s = (r / th) * tiles_per_row + c / tw;
        }
        let (off_r, off_c) = central_offset(th, tw);
        let n_subnets = n / subnet_size;
        let wi_set = (0..n_subnets)
            .map(|s| {
                let (tr, tc) = (s / tiles_per_row, s % tiles_per_row);
                (tr * th + off_r) * self.cols + tc * tw + off_c
            })
            .collect();
        self.subnet_of = subnet_of;
        self.wi_set = wi_set;
        self.tile = Some((th, tw));
        Ok(self)
    }

    /// Human-readable description used for golden files and run artifacts.
    pub fn describe(&self) -> String {
        let mut out = String::new();
        let _ = writeln!(out, "mesh {}x{} die_edge_mm {}", self.rows, self.cols, self.die_edge_mm);
        let _ = writeln!(out, "switches {}", self.num_switches());
        if let Some((th, tw)) = self.tile {
            let _ = writeln!(out, "tile {th}x{tw}");
        }
        for l in &self.links {
            let _ = writeln!(out, "link {} {} {:.4}", l.a, l.b, l.length_mm);
        }
        for (i, s) in self.wi_set.iter().enumerate() {
            let _ = writeln!(out, "wi {i} switch {s}");
        }
        out
    }
}

/// Near-square tile for `size` switches; taller tiles win ties (size 8 → 4×2).
fn tile_shape(rows: usize, cols: usize, size: usize) -> Option<(usize, usize)> {
    (1..=size)
        .filter(|th| size % th == 0)
        .map(|th| (th, size / th))
        .filter(|&(th, tw)| rows % th == 0 && cols % tw == 0)
        .min_by_key(|&(th, tw)| (th.abs_diff(tw), std::cmp::Reverse(th)))
}

/// Offset inside a `th`×`tw` tile of the lowest-ID switch minimizing the
/// maximum hop distance to every other switch of the tile.
fn central_offset(th: usize, tw: usize) -> (usize, usize) {
    let ecc = |r: usize, c: usize| (r.max(th - 1 - r)) + (c.max(tw - 1 - c));
    let mut best = (0, 0);
    let mut best_ecc = usize::MAX;
    for r in 0..th {
        for c in 0..tw {
            let e = ecc(r, c);
            if e < best_ecc {
                best_ecc = e;
                best = (r, c);
            }
        }
    }
    best
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn mesh_8x8_on_20mm_die() {
        let t = Topology::build_mesh(8, 8, 20.0).unwrap();
        assert_eq!(t.num_switches(), 64);
        assert_eq!(t.links.len(), 112);
        assert!(t.links.iter().all(|l| (l.length_mm - 2.5).abs() < 1e-12));
        assert!(t.wi_set.is_empty());
    }

    #[test]
    fn smallest_mesh() {
        let t = Topology::build_mesh(2, 2, 4.0).unwrap();
        assert_eq!(t.links.len(), 4);
        assert!(t.links.iter().all(|l| l.length_mm == 2.0));
    }

    #[test]
    fn rectangular_mesh_lengths() {
        let t = Topology::build_mesh(4, 8, 16.0).unwrap();
        assert_eq!(t.num_switches(), 32);
        assert_eq!(t.links.len(), 52);
        for l in &t.links {
            let horizontal = l.b == l.a + 1;
            assert_eq!(l.length_mm, if horizontal { 2.0 } else { 4.0 });
        }
    }

    #[test]
    fn rejects_degenerate_mesh() {
        assert!(Topology::build_mesh(1, 8, 20.0).is_err());
        assert!(Topology::build_mesh(8, 1, 20.0).is_err());
    }

    #[test]
    fn eight_wis_on_64_cores() {
        let t = Topology::build_mesh(8, 8, 20.0).unwrap().partition_and_place_wis(8).unwrap();
        assert_eq!(t.num_wis(), 8);
        assert_eq!(t.tile, Some((4, 2)));
        for (s, &wi) in t.wi_set.iter().enumerate() {
            assert_eq!(t.subnet_of[wi], s);
        }
    }

    #[test]
    fn single_subnet() {
        let t = Topology::build_mesh(8, 8, 20.0).unwrap().partition_and_place_wis(64).unwrap();
        assert_eq!(t.wi_set.len(), 1);
        // 8x8 tile: rows/cols 3 and 4 both have eccentricity 4; lowest id wins.
        assert_eq!(t.wi_set[0], 3 * 8 + 3);
    }

    #[test]
    fn two_by_two_tiles_pick_lowest_id() {
        let t = Topology::build_mesh(4, 4, 16.0).unwrap().partition_and_place_wis(4).unwrap();
        assert_eq!(t.wi_set, vec![0, 2, 8, 10]);
        assert_eq!(&t.subnet_of[..8], &[0, 0, 1, 1, 0, 0, 1, 1]);
    }

    #[test]
    fn rejects_untileable_subnets() {
        let t = Topology::build_mesh(8, 8, 20.0).unwrap();
        assert!(t.clone().partition_and_place_wis(3).is_err());
        assert!(t.clone().partition_and_place_wis(0).is_err());
        // Any divisor of rows*cols admits a rectangular tiling: 12 tiles 6x6 as 6x2.
        let t = Topology::build_mesh(6, 6, 20.0).unwrap().partition_and_place_wis(12).unwrap();
        assert_eq!(t.tile, Some((6, 2)));
    }

    #[test]
    fn describe_lists_everything() {
        let t = Topology::build_mesh(2, 2, 4.0).unwrap().partition_and_place_wis(4).unwrap();
        let d = t.describe();
        assert_eq!(
            d,
            "mesh 2x2 die_edge_mm 4\nswitches 4\ntile 2x2\nlink 0 1 2.0000\nlink 0 2 2.0000\n\
             link 1 3 2.0000\nlink 2 3 2.0000\nwi 0 switch 0\n"
        );
    }
}
