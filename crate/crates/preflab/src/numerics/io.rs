//! Text checkpoint format for network parameters.
//!
//! Layout, one line per record:
//!
//! ```text
//! netspec input_dim=<n> hidden=<a,b,..> slope=<s> final_bias=<0|1>
//! W0 <rows> <cols> <v1> <v2> ...
//! b0 <n> <v1> ...
//! ```
//!
//! `hidden=` with nothing after the `=` denotes a linear model. Floats are
//! printed with 17 significant digits and round-trip exactly.

use super::{NetParams, NetSpec};
use crate::error::{Error, Result};
use crate::util::fmt_f64;
use std::io::{BufRead, Write};

pub fn write_checkpoint<W: Write>(spec: &NetSpec, params: &NetParams, out: &mut W) -> Result<()> {
    params.check_shapes(spec)?;
    let hidden = spec
        .hidden
        .iter()
        .map(|h| h.to_string())
        .collect::<Vec<_>>()
        .join(",");
    writeln!(
        out,
        "netspec input_dim={} hidden={} slope={} final_bias={}",
        spec.input_dim,
        hidden,
        fmt_f64(spec.slope),
        u8::from(spec.final_bias)
    )?;
    for (l, w) in params.weights.iter().enumerate() {
        write!(out, "W{l} {} {}", w.rows(), w.cols())?;
        for v in w.data() {
            write!(out, " {}", fmt_f64(*v))?;
        }
        writeln!(out)?;
        if l < params.biases.len() {
            let b = &params.biases[l];
            write!(out, "b{l} {}", b.len())?;
            for v in b {
                write!(out, " {}", fmt_f64(*v))?;
            }
            writeln!(out)?;
        }
    }
    Ok(())
}

fn field<'a>(tokens: &mut impl Iterator<Item = &'a str>, key: &str) -> Result<&'a str> {
    let tok = tokens
        .next()
        .ok_or_else(|| Error::parse("checkpoint header", format!("missing field {key}")))?;
    tok.strip_prefix(key)
        .and_then(|rest| rest.strip_prefix('='))
        .ok_or_else(|| Error::parse("checkpoint header", format!("expected {key}=<value>, got {tok}")))
}

fn parse_floats(context: &str, tokens: &[&str], n: usize) -> Result<Vec<f64>> {
    if tokens.len() != n {
        return Err(Error::parse(
            context,
            format!("expected {n} values, found {}", tokens.len()),
        ));
    }
    tokens
        .iter()
        .map(|t| {
            t.parse::<f64>()
                .map_err(|e| Error::parse(context, format!("bad float {t}: {e}")))
        })
        .collect()
}

pub fn read_checkpoint<R: BufRead>(input: &mut R) -> Result<(NetSpec, NetParams)> {
    let mut lines = input.lines();
    let header = lines
        .next()
        .ok_or_else(|| Error::parse("checkpoint", "empty file"))??;
    let mut tokens = header.split_whitespace();
    match tokens.next() {
        Some("netspec") => {}
        other => {
            return Err(Error::parse(
                "checkpoint header",
                format!("expected 'netspec', got {other:?}"),
            ))
        }
    }
    let input_dim: usize = field(&mut tokens, "input_dim")?
        .parse()
        .map_err(|e| Error::parse("checkpoint header", format!("input_dim: {e}")))?;
    let hidden_str = field(&mut tokens, "hidden")?;
    let hidden: Vec<usize> = if hidden_str.is_empty() {
        vec![]
    } else {
        hidden_str
            .split(',')
            .map(|t| {
                t.parse::<usize>()
                    .map_err(|e| Error::parse("checkpoint header", format!("hidden: {e}")))
            })
            .collect::<Result<_>>()?
    };
    let slope: f64 = field(&mut tokens, "slope")?
        .parse()
        .map_err(|e| Error::parse("checkpoint header", format!("slope: {e}")))?;
    let final_bias = match field(&mut tokens, "final_bias")? {
        "0" => false,
        "1" => true,
        other => {
            return Err(Error::parse(
                "checkpoint header",
                format!("final_bias must be 0 or 1, got {other}"),
            ))
        }
    };
    let spec = NetSpec::new(input_dim, hidden, slope, final_bias)?;

    let mut params = NetParams::zeros(&spec);
    for l in 0..spec.n_layers() {
        let line = lines
            .next()
            .ok_or_else(|| Error::parse("checkpoint", format!("missing tensor W{l}")))??;
        let toks: Vec<&str> = line.split_whitespace().collect();
        let ctx = format!("checkpoint W{l}");
        if toks.len() < 3 || toks[0] != format!("W{l}") {
            return Err(Error::parse(&ctx, "malformed tensor line"));
        }
        let rows: usize = toks[1].parse().map_err(|e| Error::parse(&ctx, format!("rows: {e}")))?;
        let cols: usize = toks[2].parse().map_err(|e| Error::parse(&ctx, format!("cols: {e}")))?;
        if rows != params.weights[l].rows() || cols != params.weights[l].cols() {
            return Err(Error::parse(&ctx, "tensor shape does not match header"));
        }
        let values = parse_floats(&ctx, &toks[3..], rows * cols)?;
        params.weights[l].data_mut().copy_from_slice(&values);

        if l < params.biases.len() {
            let line = lines
                .next()
                .ok_or_else(|| Error::parse("checkpoint", format!("missing tensor b{l}")))??;
            let toks: Vec<&str> = line.split_whitespace().collect();
            let ctx = format!("checkpoint b{l}");
            if toks.len() < 2 || toks[0] != format!("b{l}") {
                return Err(Error::parse(&ctx, "malformed tensor line"));
            }
            let n: usize = toks[1].parse().map_err(|e| Error::parse(&ctx, format!("len: {e}")))?;
            if n != params.biases[l].len() {
                return Err(Error::parse(&ctx, "tensor shape does not match header"));
            }
            let values = parse_floats(&ctx, &toks[2..], n)?;
            params.biases[l].copy_from_slice(&values);
        }
    }
    params.validate_finite()?;
    Ok((spec, params))
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::io::BufReader;

    fn round_trip(spec: &NetSpec, params: &NetParams) -> (NetSpec, NetParams) {
        let mut buf = Vec::new();
        write_checkpoint(spec, params, &mut buf).unwrap();
        read_checkpoint(&mut BufReader::new(buf.as_slice())).unwrap()
    }

    #[test]
    fn checkpoint_round_trip_is_bit_exact() {
        let spec = NetSpec::new(3, vec![5, 2], 0.01, false).unwrap();
        let params = NetParams::init(&spec, 77);
        let (spec2, params2) = round_trip(&spec, &params);
        assert_eq!(spec, spec2);
        assert_eq!(params, params2);
    }

    #[test]
    fn linear_model_round_trips_with_empty_hidden() {
        let spec = NetSpec::new(4, vec![], 0.01, true).unwrap();
        let params = NetParams::init(&spec, 3);
        let mut buf = Vec::new();
        write_checkpoint(&spec, &params, &mut buf).unwrap();
        let text = String::from_utf8(buf.clone()).unwrap();
        assert!(text.starts_with("netspec input_dim=4 hidden= slope="));
        let (spec2, params2) = read_checkpoint(&mut BufReader::new(buf.as_slice())).unwrap();
        assert_eq!(spec, spec2);
        assert_eq!(params, params2);
    }

    #[test]
    fn truncated_checkpoint_is_a_parse_error() {
        let spec = NetSpec::mlp(2, &[3]);
        let params = NetParams::init(&spec, 1);
        let mut buf = Vec::new();
        write_checkpoint(&spec, &params, &mut buf).unwrap();
        let text = String::from_utf8(buf).unwrap();
        let cut: String = text.lines().take(2).collect::<Vec<_>>().join("\n");
        let err = read_checkpoint(&mut BufReader::new(cut.as_bytes()));
        assert!(matches!(err, Err(crate::Error::Parse { .. }) | Err(crate::Error::Io(_))));
    }
}
