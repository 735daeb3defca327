//! Plain-text grid files.
//!
//! A grid is its side length on one line followed by `n` rows of `0`/`1`
//! characters, top row first. A trajectory is a sequence of grids separated
//! by a single blank line.

use crate::ca::Grid;
use crate::{Error, Result};

pub fn format_grid(grid: &Grid) -> String {
    let n = grid.n();
    let mut out = String::with_capacity((n + 1) * n + 8);
    out.push_str(&n.to_string());
    out.push('\n');
    for row in grid.cells().chunks(n) {
        out.extend(row.iter().map(|&c| if c == 1 { '1' } else { '0' }));
        out.push('\n');
    }
    out
}

pub fn format_trajectory(frames: &[Grid]) -> String {
    frames.iter().map(format_grid).collect::<Vec<_>>().join("\n")
}

fn parse_block(lines: &[&str], first_line: usize) -> Result<Grid> {
    let header = lines[0].trim();
    let n: usize = header
        .parse()
        .map_err(|_| Error::Parse(format!("line {}: expected grid size, got {header:?}", first_line + 1)))?;
    if lines.len() != n + 1 {
        return Err(Error::Parse(format!(
            "line {}: grid of size {n} needs {n} rows, found {}",
            first_line + 1,
            lines.len() - 1
        )));
    }
    let mut cells = Vec::with_capacity(n * n);
    for (i, row) in lines[1..].iter().enumerate() {
        let row = row.trim_end_matches('\r');
        if row.len() != n {
            return Err(Error::Parse(format!(
                "line {}: expected {n} cells, found {}",
                first_line + i + 2,
                row.len()
            )));
        }
        for ch in row.chars() {
            match ch {
                '0' => cells.push(0),
                '1' => cells.push(1),
                other => {
                    return Err(Error::Parse(format!("line {}: invalid cell {other:?}", first_line + i + 2)))
                }
            }
        }
    }
    Grid::from_cells(n, cells).map_err(|e| Error::Parse(format!("line {}: {e}", first_line + 1)))
}

/// Parses every grid in a trajectory file.
pub fn parse_trajectory(text: &str) -> Result<Vec<Grid>> {
    let lines: Vec<&str> = text.lines().collect();
    let mut grids = Vec::new();
    let mut start = 0;
    while start < lines.len() {
        if lines[start].trim().is_empty() {
            start += 1;
            continue;
        }
        let mut end = start;
        while end < lines.len() && !lines[end].trim().is_empty() {
            end += 1;
        }
        grids.push(parse_block(&lines[start..end], start)?);
        start = end;
    }
    Ok(grids)
}

/// Parses a file holding exactly one grid.
pub fn parse_grid(text: &str) -> Result<Grid> {
    let mut grids = parse_trajectory(text)?;
    match grids.len() {
        1 => Ok(grids.pop().unwrap()),
        0 => Err(Error::Parse("no grid found".into())),
        k => Err(Error::Parse(format!("expected one grid, found {k}"))),
    }
}
