//! CSV output. Every file starts with `#` comment lines carrying the run
//! manifest; floating-point values are written with 12 significant digits.

use std::fmt::Write as _;
use std::fs;
use std::path::Path;

use crate::capacity::{CapacityResult, PositionDistribution};
use crate::channel::{GainMap, ReceiverConfig, Role};
use crate::error::{Error, Result};
use crate::experiment::SweepPoint;
use crate::partition::IsohypsePartition;
use crate::protocol::{KeyMaterial, ProtocolReport};

/// 12 significant digits in scientific notation.
pub fn num(v: f64) -> String {
    if v.is_finite() {
        format!("{v:.11e}")
    } else if v.is_nan() {
        "nan".into()
    } else if v > 0.0 {
        "inf".into()
    } else {
        "-inf".into()
    }
}

fn parse_num(s: &str, line: usize) -> Result<f64> {
    s.trim().parse().map_err(|_| Error::Parse {
        line,
        reason: format!("`{s}` is not a number"),
    })
}

fn header(manifest: &str) -> String {
    let mut out = String::new();
    for l in manifest.lines() {
        out.push_str("# ");
        out.push_str(l);
        out.push('\n');
    }
    out
}

pub fn write_file(path: &Path, contents: &str) -> Result<()> {
    if let Some(dir) = path.parent().filter(|d| !d.as_os_str().is_empty()) {
        fs::create_dir_all(dir).map_err(|source| Error::Io {
            path: dir.to_path_buf(),
            source,
        })?;
    }
    fs::write(path, contents).map_err(|source| Error::Io {
        path: path.to_path_buf(),
        source,
    })
}

fn receiver_line(rx: &ReceiverConfig) -> String {
    format!(
        "receiver role={} x={} y={} z={} sigma_sh_db={} d_ref_m={}",
        rx.role, rx.position[0], rx.position[1], rx.position[2], rx.sigma_sh_db, rx.d_ref
    )
}

pub const GAIN_MAP_COLUMNS: &str = "index,x_m,y_m,z_m,a_pl_db,a_sh_db,g_lin,m_lin";

pub fn gain_map_csv(manifest: &str, map: &GainMap) -> String {
    let mut out = header(manifest);
    out.push_str(&header(&receiver_line(&map.receiver)));
    out.push_str(GAIN_MAP_COLUMNS);
    out.push('\n');
    for i in 0..map.len() {
        let p = map.positions[i];
        let _ = writeln!(
            out,
            "{i},{},{},{},{},{},{},{}",
            num(p[0]),
            num(p[1]),
            num(p[2]),
            num(map.a_pl_db[i]),
            num(map.a_sh_db[i]),
            num(map.g[i]),
            num(map.m[i])
        );
    }
    out
}

/// Parses a file written by `gain_map_csv`. Returns the manifest (comment
/// lines before the receiver line) and the map.
pub fn parse_gain_map(text: &str) -> Result<(String, GainMap)> {
    let mut manifest = Vec::new();
    let mut receiver = None;
    let mut map = GainMap {
        receiver: ReceiverConfig::new(Role::Bob, [0.0; 3], 0.0, 1.0)?,
        positions: Vec::new(),
        a_pl_db: Vec::new(),
        a_sh_db: Vec::new(),
        g: Vec::new(),
        m: Vec::new(),
    };
    let mut seen_header = false;
    for (i, line) in text.lines().enumerate() {
        let ln = i + 1;
        if let Some(c) = line.strip_prefix('#') {
            let c = c.strip_prefix(' ').unwrap_or(c);
            if let Some(rest) = c.strip_prefix("receiver ") {
                receiver = Some(parse_receiver(rest, ln)?);
            } else if receiver.is_none() {
                manifest.push(c.to_string());
            }
            continue;
        }
        if !seen_header {
            if line.trim() != GAIN_MAP_COLUMNS {
                return Err(Error::Parse {
                    line: ln,
                    reason: format!("expected header `{GAIN_MAP_COLUMNS}`"),
                });
            }
            seen_header = true;
            continue;
        }
        if line.trim().is_empty() {
            continue;
        }
        let f: Vec<&str> = line.split(',').collect();
        if f.len() != 8 {
            return Err(Error::Parse {
                line: ln,
                reason: format!("expected 8 fields, got {}", f.len()),
            });
        }
        let idx: usize = f[0].trim().parse().map_err(|_| Error::Parse {
            line: ln,
            reason: format!("bad index `{}`", f[0]),
        })?;
        if idx != map.positions.len() {
            return Err(Error::Parse {
                line: ln,
                reason: format!("index {idx} out of sequence"),
            });
        }
        let v = f[1..]
            .iter()
            .map(|s| parse_num(s, ln))
            .collect::<Result<Vec<f64>>>()?;
        map.positions.push([v[0], v[1], v[2]]);
        map.a_pl_db.push(v[3]);
        map.a_sh_db.push(v[4]);
        map.g.push(v[5]);
        map.m.push(v[6]);
    }
    if !seen_header {
        return Err(Error::Parse {
            line: text.lines().count(),
            reason: "missing column header".into(),
        });
    }
    map.receiver = receiver.ok_or_else(|| Error::Parse {
        line: 1,
        reason: "missing `# receiver` line".into(),
    })?;
    Ok((manifest.join("\n"), map))
}

fn parse_receiver(s: &str, line: usize) -> Result<ReceiverConfig> {
    let mut role = None;
    let mut v = [f64::NAN; 5];
    for kv in s.split_whitespace() {
        let (k, val) = kv.split_once('=').ok_or_else(|| Error::Parse {
            line,
            reason: format!("bad receiver field `{kv}`"),
        })?;
        let slot = match k {
            "role" => {
                role = match val {
                    "bob" => Some(Role::Bob),
                    "eve" => Some(Role::Eve),
                    _ => {
                        return Err(Error::Parse {
                            line,
                            reason: format!("unknown role `{val}`"),
                        })
                    }
                };
                continue;
            }
            "x" => 0,
            "y" => 1,
            "z" => 2,
            "sigma_sh_db" => 3,
            "d_ref_m" => 4,
            _ => {
                return Err(Error::Parse {
                    line,
                    reason: format!("unknown receiver field `{k}`"),
                })
            }
        };
        v[slot] = parse_num(val, line)?;
    }
    let role = role.ok_or_else(|| Error::Parse {
        line,
        reason: "receiver role missing".into(),
    })?;
    if v.iter().any(|x| x.is_nan()) {
        return Err(Error::Parse {
            line,
            reason: "receiver fields missing".into(),
        });
    }
    ReceiverConfig::new(role, [v[0], v[1], v[2]], v[3], v[4])
}

pub fn read_gain_map(path: &Path) -> Result<(String, GainMap)> {
    let text = fs::read_to_string(path).map_err(|source| Error::Io {
        path: path.to_path_buf(),
        source,
    })?;
    parse_gain_map(&text)
}

pub fn partition_csv(manifest: &str, partition: &IsohypsePartition) -> String {
    let mut out = header(manifest);
    let _ = writeln!(out, "# delta_e={}", num(partition.delta_e));
    out.push_str("class_index,m_ell_lin,member_count,member_indices\n");
    for (i, c) in partition.classes.iter().enumerate() {
        let members: Vec<String> = c.members.iter().map(|m| m.to_string()).collect();
        let _ = writeln!(out, "{i},{},{},{}", num(c.m_ell), c.len(), members.join(";"));
    }
    out
}

pub fn capacity_csv(manifest: &str, result: &CapacityResult) -> String {
    let mut out = header(manifest);
    out.push_str("class_index,class_size,capacity_bits,upper_bound_bits,iterations,converged\n");
    for c in &result.per_class {
        let _ = writeln!(
            out,
            "{},{},{},{},{},{}",
            c.class_index,
            c.class_size,
            num(c.capacity_bits),
            num(result.upper_bound_bits),
            c.iterations,
            c.converged
        );
    }
    out
}

pub fn distribution_csv(manifest: &str, dist: &PositionDistribution) -> String {
    let mut out = header(manifest);
    out.push_str("position_index,probability\n");
    for (p, w) in dist.support.iter().zip(&dist.probabilities) {
        let _ = writeln!(out, "{p},{}", num(*w));
    }
    out
}

pub const SWEEP_COLUMNS: &str =
    "axis,value,repetition,seed,capacity_bits,upper_bound_bits,class_index,class_size,classes,delta_e,converged";

fn mean_std(v: &[f64]) -> (f64, f64) {
    let n = v.len() as f64;
    let mean = v.iter().sum::<f64>() / n;
    let var = if v.len() > 1 {
        v.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / (n - 1.0)
    } else {
        0.0
    };
    (mean, var.sqrt())
}

/// One row per (value, repetition), then a `mean` row per sweep value.
pub fn sweep_csv(manifest: &str, points: &[SweepPoint]) -> String {
    let mut out = header(manifest);
    out.push_str(SWEEP_COLUMNS);
    out.push('\n');
    let axis_name = |p: &SweepPoint| p.axis.map(|a| a.name().to_string()).unwrap_or_else(|| "none".into());
    let value = |p: &SweepPoint| if p.axis.is_some() { num(p.value) } else { String::new() };
    for p in points {
        let _ = writeln!(
            out,
            "{},{},{},{},{},{},{},{},{},{},{}",
            axis_name(p),
            value(p),
            p.repetition,
            p.seed,
            num(p.capacity_bits),
            num(p.upper_bound_bits),
            p.class_index,
            p.class_size,
            p.classes,
            num(p.delta_e),
            p.converged
        );
    }
    let mut start = 0;
    while start < points.len() {
        let v = points[start].value.to_bits();
        let end = start + points[start..].iter().take_while(|p| p.value.to_bits() == v).count();
        let group = &points[start..end];
        let (c, _) = mean_std(&group.iter().map(|p| p.capacity_bits).collect::<Vec<_>>());
        let (b, _) = mean_std(&group.iter().map(|p| p.upper_bound_bits).collect::<Vec<_>>());
        let (d, _) = mean_std(&group.iter().map(|p| p.delta_e).collect::<Vec<_>>());
        let _ = writeln!(
            out,
            "{},{},mean,,{},{},,,,{},{}",
            axis_name(&group[0]),
            value(&group[0]),
            num(c),
            num(b),
            num(d),
            group.iter().all(|p| p.converged)
        );
        start = end;
    }
    out
}

pub const PROTOCOL_COLUMNS: &str = "seed,N,K,Q,snr_min_db,rho_db,delta_e,class_index,capacity_bits,sym_disagreement,\
bit_disagreement,leak_q_t_bits,leak_m_t_bits,leak_q_t_threshold_bits,leak_m_t_threshold_bits,key_rate_bits";

/// One row per repetition, then `mean` and `std` rows.
pub fn protocol_csv(manifest: &str, reports: &[ProtocolReport]) -> String {
    let mut out = header(manifest);
    out.push_str(PROTOCOL_COLUMNS);
    out.push('\n');
    let metrics = |r: &ProtocolReport| {
        [
            r.delta_e,
            r.capacity_bits,
            r.sym_disagreement,
            r.bit_disagreement,
            r.leakage.q_t_bits,
            r.leakage.m_t_bits,
            r.leakage.q_t_threshold,
            r.leakage.m_t_threshold,
            r.key_rate_bits,
        ]
    };
    for r in reports {
        let m = metrics(r);
        let _ = writeln!(
            out,
            "{},{},{},{},{},{},{},{},{},{},{},{},{},{},{},{}",
            r.seed,
            r.transmissions,
            r.pilots,
            r.levels,
            num(r.snr_min_db),
            num(r.rho_db),
            num(m[0]),
            r.class_index,
            num(m[1]),
            num(m[2]),
            num(m[3]),
            num(m[4]),
            num(m[5]),
            num(m[6]),
            num(m[7]),
            num(m[8])
        );
    }
    if let Some(first) = reports.first() {
        let cols: Vec<Vec<f64>> = (0..9).map(|j| reports.iter().map(|r| metrics(r)[j]).collect()).collect();
        for (label, pick) in [("mean", 0usize), ("std", 1)] {
            let vals: Vec<String> = cols
                .iter()
                .map(|c| {
                    let (m, s) = mean_std(c);
                    num(if pick == 0 { m } else { s })
                })
                .collect();
            let _ = writeln!(
                out,
                "{label},{},{},{},{},{},{},,{}",
                first.transmissions,
                first.pilots,
                first.levels,
                num(first.snr_min_db),
                num(first.rho_db),
                vals[0],
                vals[1..].join(",")
            );
        }
    }
    out
}

fn hex(bits: &[bool]) -> String {
    bits.chunks(4)
        .map(|c| {
            let mut v = 0u32;
            for (i, &b) in c.iter().enumerate() {
                v |= (b as u32) << (3 - i);
            }
            char::from_digit(v, 16).expect("nibble")
        })
        .collect()
}

/// Raw key material, one `seed,party,bits,hex` line per party and repetition.
pub fn keys_csv(manifest: &str, runs: &[(u64, &KeyMaterial)]) -> String {
    let mut out = header(manifest);
    out.push_str("seed,party,bits,key_hex\n");
    for (seed, km) in runs {
        for (party, bits) in [("alice", &km.alice_bits), ("bob", &km.bob_bits)] {
            let _ = writeln!(out, "{seed},{party},{},{}", bits.len(), hex(bits));
        }
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::channel::{build_gain_map, sample_shadowing_field, ChannelParams, PathlossParams, PositionGrid};
    use proptest::prelude::*;

    fn small_map() -> GainMap {
        let grid = PositionGrid::over_area(6, 5, 60.0, 10.0).unwrap();
        let rx = ReceiverConfig::eve(&grid, 13.5, 3.0, 20.0).unwrap();
        let field = sample_shadowing_field(&grid, &rx, 4).unwrap();
        let pl = PathlossParams::new(2400.0, 60.0, 60.0).unwrap();
        build_gain_map(&grid, &rx, &field, &pl, &ChannelParams::new(50.0, 1.0).unwrap()).unwrap()
    }

    #[test]
    fn twelve_significant_digits() {
        assert_eq!(num(1234.56789012345), "1.23456789012e3");
        assert_eq!(num(-0.000123), "-1.23000000000e-4");
        assert_eq!(num(f64::NAN), "nan");
    }

    #[test]
    fn gain_map_round_trip_is_byte_identical() {
        let map = small_map();
        let text = gain_map_csv("skg gen-maps seed=4\nsecond line", &map);
        let (manifest, back) = parse_gain_map(&text).unwrap();
        assert_eq!(manifest, "skg gen-maps seed=4\nsecond line");
        assert_eq!(back.receiver, map.receiver);
        assert_eq!(gain_map_csv(&manifest, &back), text);
        for (a, b) in map.g.iter().zip(&back.g) {
            assert!(((a - b) / a).abs() < 1e-11);
        }
    }

    #[test]
    fn malformed_maps_are_rejected() {
        let text = gain_map_csv("m", &small_map());
        assert!(parse_gain_map(&text.replace("# receiver", "# rx")).is_err());
        assert!(parse_gain_map(&text.replacen("\n0,", "\n7,", 1)).is_err());
        assert!(parse_gain_map(&text.replace(GAIN_MAP_COLUMNS, "a,b")).is_err());
        assert!(matches!(
            read_gain_map(Path::new("/nonexistent/map.csv")),
            Err(Error::Io { .. })
        ));
    }

    #[test]
    fn unwritable_path_reports_path() {
        let dir = tempfile::tempdir().unwrap();
        let blocker = dir.path().join("file");
        fs::write(&blocker, "x").unwrap();
        match write_file(&blocker.join("out.csv"), "data") {
            Err(Error::Io { path, .. }) => assert!(path.starts_with(&blocker)),
            other => panic!("{other:?}"),
        }
    }

    #[test]
    fn hex_packs_msb_first() {
        assert_eq!(hex(&[true, false, true, false, true, true]), "ac");
    }

    proptest! {
        #[test]
        fn numbers_survive_text_round_trip(v in -1e300f64..1e300) {
            let s = num(v);
            let back: f64 = s.parse().unwrap();
            prop_assert_eq!(num(back), s);
        }
    }
}
