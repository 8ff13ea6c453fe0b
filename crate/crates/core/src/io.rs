//! CSV interchange: datasets, channel responses, ROC curves and RSRP traces.
//!
//! Every file may start with `#` comment lines. Writers put the run
//! provenance (`config_hash=... seed=...`) there; readers skip them.

use std::io::{Read, Write};

use num_complex::Complex;
use serde::{Deserialize, Serialize};

use crate::channel::ChannelFrequencyResponse;
use crate::dataset::Dataset;
use crate::error::{Error, Result};
use crate::eval::{RocCurve, RocPoint};
use crate::events::RsrpTrace;
use crate::labeling::Label;
use crate::real::Real;
use crate::scenario::Point;

pub const LABEL_COLUMN: &str = "y";

/// Identifies the run that produced a file.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Provenance {
    pub config_hash: String,
    pub seed: u64,
}

impl Provenance {
    pub fn comment(&self) -> String {
        format!("config_hash={} seed={}", self.config_hash, self.seed)
    }
}

/// `key=value` tokens of the leading comment lines.
fn comment_fields(text: &str) -> Vec<(String, String)> {
    text.lines()
        .take_while(|l| l.starts_with('#'))
        .flat_map(|l| l.trim_start_matches('#').split_whitespace())
        .filter_map(|tok| tok.split_once('=').map(|(k, v)| (k.to_string(), v.to_string())))
        .collect()
}

fn field<'a>(fields: &'a [(String, String)], key: &str) -> Option<&'a str> {
    fields.iter().find(|(k, _)| k == key).map(|(_, v)| v.as_str())
}

fn provenance_of(fields: &[(String, String)]) -> Option<Provenance> {
    Some(Provenance {
        config_hash: field(fields, "config_hash")?.to_string(),
        seed: field(fields, "seed")?.parse().ok()?,
    })
}

fn read_text(mut r: impl Read) -> Result<String> {
    let mut s = String::new();
    r.read_to_string(&mut s)?;
    Ok(s)
}

fn csv_reader(text: &str) -> csv::Reader<&[u8]> {
    csv::ReaderBuilder::new()
        .comment(Some(b'#'))
        .trim(csv::Trim::All)
        .from_reader(text.as_bytes())
}

fn line_of(record: &csv::StringRecord) -> u64 {
    record.position().map_or(0, |p| p.line())
}

fn malformed(line: u64, message: impl Into<String>) -> Error {
    Error::Malformed {
        line,
        message: message.into(),
    }
}

fn parse_finite<F: Real>(raw: &str, column: &str, line: u64) -> Result<F> {
    let v: F = raw
        .parse()
        .map_err(|_| malformed(line, format!("column '{column}': cannot parse '{raw}' as a number")))?;
    if !v.is_finite() {
        return Err(malformed(line, format!("column '{column}': non-finite value '{raw}'")));
    }
    Ok(v)
}

fn headers(reader: &mut csv::Reader<&[u8]>) -> Result<Vec<String>> {
    let h = reader.headers()?;
    if h.is_empty() || (h.len() == 1 && h[0].is_empty()) {
        return Err(Error::data("file has no header row"));
    }
    Ok(h.iter().map(str::to_string).collect())
}

/// Feature columns in dataset order, then `y`.
pub fn write_dataset_csv<F: Real>(mut w: impl Write, dataset: &Dataset<F>, provenance: &Provenance) -> Result<()> {
    let r = dataset.class_ratio();
    writeln!(w, "# dataset {} ones={} zeros={}", provenance.comment(), r.ones, r.zeros)?;
    let mut out = csv::Writer::from_writer(w);
    let mut header: Vec<&str> = dataset.feature_names().iter().map(String::as_str).collect();
    header.push(LABEL_COLUMN);
    out.write_record(&header)?;
    let mut rec = Vec::with_capacity(header.len());
    for (i, row) in dataset.rows().enumerate() {
        rec.clear();
        rec.extend(row.iter().map(|v| v.to_string()));
        rec.push(dataset.label(i).to_string());
        out.write_record(&rec)?;
    }
    out.flush()?;
    Ok(())
}

/// Reads a dataset; every column except `y` is a feature.
pub fn read_dataset_csv<F: Real>(r: impl Read) -> Result<(Dataset<F>, Option<Provenance>)> {
    let text = read_text(r)?;
    let prov = provenance_of(&comment_fields(&text));
    let mut reader = csv_reader(&text);
    let header = headers(&mut reader)?;
    let y_col = header
        .iter()
        .position(|h| h == LABEL_COLUMN)
        .ok_or_else(|| Error::data("dataset CSV has no 'y' column"))?;
    let names: Vec<String> = header.iter().enumerate().filter(|&(j, _)| j != y_col).map(|(_, h)| h.clone()).collect();
    let mut ds = Dataset::empty(names)?;
    let mut row = Vec::with_capacity(header.len());
    for rec in reader.records() {
        let rec = rec?;
        let line = line_of(&rec);
        if rec.len() != header.len() {
            return Err(malformed(line, format!("expected {} fields, found {}", header.len(), rec.len())));
        }
        row.clear();
        let mut label = None;
        for (j, raw) in rec.iter().enumerate() {
            if j == y_col {
                label = Some(match raw {
                    "0" => Label::Zero,
                    "1" => Label::One,
                    _ => return Err(malformed(line, format!("label must be 0 or 1, found '{raw}'"))),
                });
            } else {
                row.push(parse_finite(raw, &header[j], line)?);
            }
        }
        ds.push(&row, label.expect("label column present"))?;
    }
    if ds.is_empty() {
        return Err(Error::data("dataset CSV has no rows"));
    }
    Ok((ds, prov))
}

/// Column layout of a channel-response CSV. The default matches what
/// [`write_cfr_csv`] produces; a JSON mapping file can rename columns.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct CfrSchema {
    pub ue_column: String,
    pub antenna_column: String,
    pub x_column: String,
    pub y_column: String,
    pub snr_column: String,
    /// Subcarrier `k` is read from `{re_prefix}{k}` and `{im_prefix}{k}`.
    pub re_prefix: String,
    pub im_prefix: String,
    /// Reject UEs with a different antenna count.
    pub expected_antennas: Option<usize>,
}

impl Default for CfrSchema {
    fn default() -> Self {
        CfrSchema {
            ue_column: "ue_id".into(),
            antenna_column: "antenna".into(),
            x_column: "x".into(),
            y_column: "y".into(),
            snr_column: "snr_db".into(),
            re_prefix: "re_".into(),
            im_prefix: "im_".into(),
            expected_antennas: None,
        }
    }
}

/// One UE's measured response and where it was measured.
#[derive(Debug, Clone, PartialEq)]
pub struct CfrRecord<F> {
    pub ue_id: u32,
    pub position: Point,
    pub cfr: ChannelFrequencyResponse<F>,
}

/// One row per (UE, antenna): `ue_id,antenna,x,y,snr_db,re_0,im_0,...`.
pub fn write_cfr_csv<F: Real>(mut w: impl Write, records: &[CfrRecord<F>], provenance: &Provenance) -> Result<()> {
    writeln!(w, "# cfr {}", provenance.comment())?;
    let mut out = csv::Writer::from_writer(w);
    let n_sc = records.first().map_or(0, |r| r.cfr.n_subcarriers());
    let mut header: Vec<String> = ["ue_id", "antenna", "x", "y", "snr_db"].iter().map(|s| s.to_string()).collect();
    for k in 0..n_sc {
        header.push(format!("re_{k}"));
        header.push(format!("im_{k}"));
    }
    out.write_record(&header)?;
    for r in records {
        if r.cfr.n_subcarriers() != n_sc {
            return Err(Error::data("all responses in a CFR file need the same subcarrier count"));
        }
        for a in 0..r.cfr.n_antennas() {
            let mut rec = vec![
                r.ue_id.to_string(),
                a.to_string(),
                r.position.x.to_string(),
                r.position.y.to_string(),
                r.cfr.snr_db_per_antenna[a].to_string(),
            ];
            for h in r.cfr.antenna(a) {
                rec.push(h.re.to_string());
                rec.push(h.im.to_string());
            }
            out.write_record(&rec)?;
        }
    }
    out.flush()?;
    Ok(())
}

struct CfrColumns {
    ue: usize,
    antenna: usize,
    x: usize,
    y: usize,
    snr: usize,
    re: Vec<usize>,
    im: Vec<usize>,
}

impl CfrColumns {
    fn locate(header: &[String], schema: &CfrSchema) -> Result<Self> {
        let find = |name: &str| {
            header
                .iter()
                .position(|h| h == name)
                .ok_or_else(|| Error::data(format!("CFR CSV has no '{name}' column")))
        };
        let mut re = Vec::new();
        let mut im = Vec::new();
        loop {
            let k = re.len();
            match (
                header.iter().position(|h| *h == format!("{}{k}", schema.re_prefix)),
                header.iter().position(|h| *h == format!("{}{k}", schema.im_prefix)),
            ) {
                (Some(r), Some(i)) => {
                    re.push(r);
                    im.push(i);
                }
                (None, None) => break,
                _ => return Err(Error::data(format!("subcarrier {k} lacks a real or imaginary column"))),
            }
        }
        if re.is_empty() {
            return Err(Error::data("CFR CSV has no subcarrier columns"));
        }
        Ok(CfrColumns {
            ue: find(&schema.ue_column)?,
            antenna: find(&schema.antenna_column)?,
            x: find(&schema.x_column)?,
            y: find(&schema.y_column)?,
            snr: find(&schema.snr_column)?,
            re,
            im,
        })
    }
}

/// Groups rows by UE, in order of first appearance. Antennas of a UE must be
/// numbered `0..n` in order.
pub fn read_cfr_csv<F: Real>(r: impl Read, schema: &CfrSchema) -> Result<Vec<CfrRecord<F>>> {
    let text = read_text(r)?;
    let mut reader = csv_reader(&text);
    let header = headers(&mut reader)?;
    let cols = CfrColumns::locate(&header, schema)?;
    let n_sc = cols.re.len();

    struct Pending<F> {
        ue_id: u32,
        position: Point,
        line: u64,
        samples: Vec<Complex<F>>,
        snr: Vec<F>,
    }
    let mut out = Vec::new();
    let mut current: Option<Pending<F>> = None;
    let finish = |p: Pending<F>, out: &mut Vec<CfrRecord<F>>| -> Result<()> {
        let n_ant = p.snr.len();
        if let Some(expected) = schema.expected_antennas {
            if n_ant != expected {
                return Err(malformed(
                    p.line,
                    format!("UE {} has {n_ant} antennas, expected {expected}", p.ue_id),
                ));
            }
        }
        if out.iter().any(|r: &CfrRecord<F>| r.ue_id == p.ue_id) {
            return Err(malformed(p.line, format!("rows of UE {} are not contiguous", p.ue_id)));
        }
        let cfr = ChannelFrequencyResponse::new(n_ant, n_sc, p.samples, p.snr).map_err(|e| malformed(p.line, e.to_string()))?;
        out.push(CfrRecord {
            ue_id: p.ue_id,
            position: p.position,
            cfr,
        });
        Ok(())
    };

    for rec in reader.records() {
        let rec = rec?;
        let line = line_of(&rec);
        if rec.len() != header.len() {
            return Err(malformed(line, format!("expected {} fields, found {}", header.len(), rec.len())));
        }
        let ue_id: u32 = rec[cols.ue]
            .parse()
            .map_err(|_| malformed(line, format!("bad UE id '{}'", &rec[cols.ue])))?;
        let antenna: usize = rec[cols.antenna]
            .parse()
            .map_err(|_| malformed(line, format!("bad antenna index '{}'", &rec[cols.antenna])))?;
        let x: f64 = parse_finite(&rec[cols.x], &schema.x_column, line)?;
        let y: f64 = parse_finite(&rec[cols.y], &schema.y_column, line)?;
        let snr: F = parse_finite(&rec[cols.snr], &schema.snr_column, line)?;

        if current.as_ref().is_some_and(|p| p.ue_id != ue_id) {
            finish(current.take().expect("checked"), &mut out)?;
        }
        let p = current.get_or_insert_with(|| Pending {
            ue_id,
            position: Point::new(x, y),
            line,
            samples: Vec::new(),
            snr: Vec::new(),
        });
        if antenna != p.snr.len() {
            return Err(malformed(
                line,
                format!("UE {ue_id}: antenna {antenna} out of order, expected {}", p.snr.len()),
            ));
        }
        if p.position != Point::new(x, y) {
            return Err(malformed(line, format!("UE {ue_id}: position differs between antennas")));
        }
        p.snr.push(snr);
        for k in 0..n_sc {
            let re = parse_finite(&rec[cols.re[k]], &header[cols.re[k]], line)?;
            let im = parse_finite(&rec[cols.im[k]], &header[cols.im[k]], line)?;
            p.samples.push(Complex::new(re, im));
        }
    }
    if let Some(p) = current {
        finish(p, &mut out)?;
    }
    if out.is_empty() {
        return Err(Error::data("CFR CSV has no rows"));
    }
    Ok(out)
}

/// `fpr,tpr,threshold` after a comment carrying the fold and its AUROC.
pub fn write_roc_csv<F: Real>(mut w: impl Write, fold: &str, curve: &RocCurve<F>, provenance: &Provenance) -> Result<()> {
    writeln!(w, "# fold={fold} auroc={} {}", curve.auroc, provenance.comment())?;
    let mut out = csv::Writer::from_writer(w);
    out.write_record(["fpr", "tpr", "threshold"])?;
    for p in &curve.points {
        out.write_record([p.fpr.to_string(), p.tpr.to_string(), p.threshold.to_string()])?;
    }
    out.flush()?;
    Ok(())
}

/// Fold label and curve from a ROC CSV.
pub fn read_roc_csv(r: impl Read) -> Result<(String, RocCurve<f64>)> {
    let text = read_text(r)?;
    let fields = comment_fields(&text);
    let fold = field(&fields, "fold").unwrap_or("?").to_string();
    let auroc: f64 = field(&fields, "auroc")
        .ok_or_else(|| Error::data("ROC CSV lacks an auroc comment"))?
        .parse()
        .map_err(|_| Error::data("ROC CSV has an unparsable auroc"))?;
    let mut reader = csv_reader(&text);
    let header = headers(&mut reader)?;
    if header != ["fpr", "tpr", "threshold"] {
        return Err(Error::data("ROC CSV header must be fpr,tpr,threshold"));
    }
    let mut points = Vec::new();
    for rec in reader.records() {
        let rec = rec?;
        let line = line_of(&rec);
        let threshold: f64 = rec[2]
            .parse()
            .map_err(|_| malformed(line, format!("bad threshold '{}'", &rec[2])))?;
        points.push(RocPoint {
            fpr: parse_finite(&rec[0], "fpr", line)?,
            tpr: parse_finite(&rec[1], "tpr", line)?,
            threshold,
        });
    }
    if points.len() < 2 {
        return Err(Error::data("ROC CSV needs at least two points"));
    }
    Ok((fold, RocCurve { points, auroc }))
}

const TRACE_HEADER: [&str; 3] = ["timestamp", "pcell_rsrp_dbm", "scell_rsrp_dbm"];

pub fn read_trace_csv(r: impl Read) -> Result<RsrpTrace> {
    let text = read_text(r)?;
    let mut reader = csv_reader(&text);
    let header = headers(&mut reader)?;
    if header != TRACE_HEADER {
        return Err(Error::data("trace CSV header must be timestamp,pcell_rsrp_dbm,scell_rsrp_dbm"));
    }
    let (mut t, mut p, mut s) = (Vec::new(), Vec::new(), Vec::new());
    for rec in reader.records() {
        let rec = rec?;
        let line = line_of(&rec);
        if rec.len() != 3 {
            return Err(malformed(line, format!("expected 3 fields, found {}", rec.len())));
        }
        t.push(parse_finite(&rec[0], TRACE_HEADER[0], line)?);
        p.push(parse_finite(&rec[1], TRACE_HEADER[1], line)?);
        s.push(parse_finite(&rec[2], TRACE_HEADER[2], line)?);
    }
    RsrpTrace::new(t, p, s)
}

pub fn write_trace_csv(w: impl Write, trace: &RsrpTrace) -> Result<()> {
    let mut out = csv::Writer::from_writer(w);
    out.write_record(TRACE_HEADER)?;
    for i in 0..trace.len() {
        out.write_record([
            trace.timestamps()[i].to_string(),
            trace.pcell()[i].to_string(),
            trace.scell()[i].to_string(),
        ])?;
    }
    out.flush()?;
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::eval::roc_curve;

    fn prov() -> Provenance {
        Provenance {
            config_hash: "abc".into(),
            seed: 7,
        }
    }

    #[test]
    fn dataset_round_trip() {
        let ds = Dataset::new(
            vec!["energy".into(), "sector_id".into()],
            vec![vec![0.1, 2.0], vec![1e-30, 0.0], vec![123.456, 1.0]],
            vec![Label::One, Label::Zero, Label::Zero],
        )
        .unwrap();
        let mut buf = Vec::new();
        write_dataset_csv(&mut buf, &ds, &prov()).unwrap();
        let text = String::from_utf8(buf.clone()).unwrap();
        assert!(text.starts_with("# dataset config_hash=abc seed=7 ones=1 zeros=2\nenergy,sector_id,y\n"));
        let (back, p) = read_dataset_csv::<f64>(&buf[..]).unwrap();
        assert_eq!(back, ds);
        assert_eq!(p, Some(prov()));
    }

    #[test]
    fn dataset_errors_name_lines() {
        let err = read_dataset_csv::<f64>("a,y\n1,0\nNaN,1\n".as_bytes()).unwrap_err();
        assert!(matches!(err, Error::Malformed { line: 3, .. }), "{err}");
        let err = read_dataset_csv::<f64>("# c\na,y\n1,0\n2,5\n".as_bytes()).unwrap_err();
        assert!(matches!(err, Error::Malformed { line: 4, .. }), "{err}");
        assert!(read_dataset_csv::<f64>("".as_bytes()).is_err());
        assert!(read_dataset_csv::<f64>("a,y\n".as_bytes()).is_err());
        assert!(read_dataset_csv::<f64>("a,b\n1,2\n".as_bytes()).is_err());
    }

    fn record(ue: u32, ant: usize, sc: usize) -> CfrRecord<f64> {
        let samples = (0..ant * sc).map(|i| Complex::new(i as f64 * 0.5, -(i as f64))).collect();
        CfrRecord {
            ue_id: ue,
            position: Point::new(0.25, -0.5),
            cfr: ChannelFrequencyResponse::new(ant, sc, samples, (0..ant).map(|a| a as f64).collect()).unwrap(),
        }
    }

    #[test]
    fn cfr_round_trip() {
        let recs = vec![record(3, 2, 4), record(9, 2, 4)];
        let mut buf = Vec::new();
        write_cfr_csv(&mut buf, &recs, &prov()).unwrap();
        let text = String::from_utf8(buf.clone()).unwrap();
        assert!(text.lines().nth(1).unwrap().starts_with("ue_id,antenna,x,y,snr_db,re_0,im_0,re_1"));
        let back: Vec<CfrRecord<f64>> = read_cfr_csv(&buf[..], &CfrSchema::default()).unwrap();
        assert_eq!(back, recs);

        let strict = CfrSchema {
            expected_antennas: Some(56),
            ..CfrSchema::default()
        };
        assert!(read_cfr_csv::<f64>(&buf[..], &strict).is_err());
    }

    #[test]
    fn cfr_rejects_bad_rows() {
        let text = "ue_id,antenna,x,y,snr_db,re_0,im_0\n0,0,0,0,10,1,0\n0,1,0,0,10,NaN,0\n";
        let err = read_cfr_csv::<f64>(text.as_bytes(), &CfrSchema::default()).unwrap_err();
        assert!(matches!(err, Error::Malformed { line: 3, .. }), "{err}");
        let skip = "ue_id,antenna,x,y,snr_db,re_0,im_0\n0,1,0,0,10,1,0\n";
        assert!(read_cfr_csv::<f64>(skip.as_bytes(), &CfrSchema::default()).is_err());
        assert!(read_cfr_csv::<f64>("".as_bytes(), &CfrSchema::default()).is_err());
    }

    #[test]
    fn custom_schema_mapping() {
        let schema: CfrSchema = serde_json::from_str(
            r#"{"ue_column":"pos_id","antenna_column":"ant","x_column":"px","y_column":"py","snr_column":"snr","re_prefix":"r","im_prefix":"i"}"#,
        )
        .unwrap();
        let text = "pos_id,ant,px,py,snr,r0,i0,r1,i1\n5,0,0.1,0.2,30,1,2,3,4\n";
        let recs = read_cfr_csv::<f64>(text.as_bytes(), &schema).unwrap();
        assert_eq!(recs[0].cfr.get(0, 1), Complex::new(3.0, 4.0));
    }

    #[test]
    fn roc_round_trip() {
        let c = roc_curve(&[0.9, 0.3, 0.5, 0.5], &[Label::One, Label::Zero, Label::One, Label::Zero]).unwrap();
        let mut buf = Vec::new();
        write_roc_csv(&mut buf, "2", &c, &prov()).unwrap();
        let text = String::from_utf8(buf.clone()).unwrap();
        assert!(text.starts_with("# fold=2 auroc=0.875 config_hash=abc seed=7\nfpr,tpr,threshold\n0,0,inf\n"));
        let (fold, back) = read_roc_csv(&buf[..]).unwrap();
        assert_eq!(fold, "2");
        assert_eq!(back, c);
    }

    #[test]
    fn trace_round_trip() {
        let t = RsrpTrace::new(vec![0.0, 0.5], vec![-80.0, -90.5], vec![-100.0, -70.0]).unwrap();
        let mut buf = Vec::new();
        write_trace_csv(&mut buf, &t).unwrap();
        assert_eq!(read_trace_csv(&buf[..]).unwrap(), t);
        assert!(read_trace_csv("t,p,s\n".as_bytes()).is_err());
    }
}
