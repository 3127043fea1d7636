//! CSV records for traces, classifications and region maps.

use std::io::{Read, Write};

use serde::{Deserialize, Serialize};

use crate::analysis::{StateClassification, StateLabel};
use crate::cavity::{RoundTripTrace, TripRecord};
use crate::sweep::{Cell, CellKey, CellOutcome, CellSummary, RegionMap};

pub type CsvResult<T> = Result<T, csv::Error>;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TraceRow {
    pub trip: usize,
    pub energy_pj: f64,
    pub cw_level_w: f64,
    pub residual: f64,
    pub pulse_count: usize,
    /// Pulse positions in ps, `;`-separated.
    pub positions_ps: String,
}

impl From<&TripRecord> for TraceRow {
    fn from(r: &TripRecord) -> Self {
        Self {
            trip: r.trip,
            energy_pj: r.energy_pj,
            cw_level_w: r.cw_level_w,
            residual: r.residual,
            pulse_count: r.pulse_count,
            positions_ps: r
                .positions_ps
                .iter()
                .map(|p| p.to_string())
                .collect::<Vec<_>>()
                .join(";"),
        }
    }
}

impl TraceRow {
    pub fn to_record(&self) -> Result<TripRecord, std::num::ParseFloatError> {
        let positions_ps = if self.positions_ps.is_empty() {
            Vec::new()
        } else {
            self.positions_ps
                .split(';')
                .map(str::parse)
                .collect::<Result<_, _>>()?
        };
        Ok(TripRecord {
            trip: self.trip,
            energy_pj: self.energy_pj,
            cw_level_w: self.cw_level_w,
            residual: self.residual,
            pulse_count: self.pulse_count,
            positions_ps,
        })
    }
}

pub fn write_trace<W: Write>(w: W, trace: &RoundTripTrace) -> CsvResult<()> {
    let mut out = csv::Writer::from_writer(w);
    for r in &trace.records {
        out.serialize(TraceRow::from(r))?;
    }
    out.flush()?;
    Ok(())
}

pub fn read_trace<R: Read>(r: R) -> CsvResult<Vec<TraceRow>> {
    csv::Reader::from_reader(r).deserialize().collect()
}

/// One row per detected pulse; a run without pulses yields a single row
/// with empty pulse columns.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ClassificationRow {
    pub run_id: String,
    pub label: StateLabel,
    pub pulse_count: usize,
    pub pulse_index: Option<usize>,
    pub position_ps: Option<f64>,
    pub fwhm_ps: Option<f64>,
    pub depth: Option<f64>,
    pub phase_step_rad: Option<f64>,
    pub cw_level_w: f64,
    pub bandwidth_nm: f64,
    pub tbp: Option<f64>,
}

pub fn classification_rows(run_id: &str, c: &StateClassification) -> Vec<ClassificationRow> {
    let base = ClassificationRow {
        run_id: run_id.to_string(),
        label: c.label,
        pulse_count: c.pulses.len(),
        pulse_index: None,
        position_ps: None,
        fwhm_ps: None,
        depth: None,
        phase_step_rad: None,
        cw_level_w: c.cw_level,
        bandwidth_nm: c.spectral_bw_3db,
        tbp: c.tbp,
    };
    if c.pulses.is_empty() {
        return vec![base];
    }
    c.pulses
        .iter()
        .enumerate()
        .map(|(i, p)| ClassificationRow {
            pulse_index: Some(i),
            position_ps: Some(p.position),
            fwhm_ps: Some(p.fwhm),
            depth: Some(p.modulation_depth),
            phase_step_rad: p.phase_step,
            ..base.clone()
        })
        .collect()
}

pub fn write_classification<W: Write>(w: W, rows: &[ClassificationRow]) -> CsvResult<()> {
    let mut out = csv::Writer::from_writer(w);
    for r in rows {
        out.serialize(r)?;
    }
    out.flush()?;
    Ok(())
}

pub fn read_classification<R: Read>(r: R) -> CsvResult<Vec<ClassificationRow>> {
    csv::Reader::from_reader(r).deserialize().collect()
}

/// Region-map row; `label` is a state label or `error`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RegionRow {
    pub smf_length_m: f64,
    pub net_dispersion_ps2: f64,
    pub gain_per_km: f64,
    pub label: String,
    pub pulse_count: Option<usize>,
    pub depth_max: Option<f64>,
    pub fwhm_ps: Option<f64>,
    pub bandwidth_nm: Option<f64>,
    pub seed: u64,
    pub round_trips: Option<usize>,
    pub error: Option<String>,
}

impl From<&Cell> for RegionRow {
    fn from(c: &Cell) -> Self {
        let base = RegionRow {
            smf_length_m: c.key.smf_length_m,
            net_dispersion_ps2: c.net_dispersion_ps2,
            gain_per_km: c.key.gain_per_km,
            label: "error".to_string(),
            pulse_count: None,
            depth_max: None,
            fwhm_ps: None,
            bandwidth_nm: None,
            seed: c.key.seed,
            round_trips: None,
            error: None,
        };
        match &c.outcome {
            CellOutcome::Classified(s) => RegionRow {
                label: s.label.as_str().to_string(),
                pulse_count: Some(s.pulse_count),
                depth_max: Some(s.depth_max),
                fwhm_ps: Some(s.fwhm_ps),
                bandwidth_nm: Some(s.bandwidth_nm),
                round_trips: Some(s.round_trips),
                ..base
            },
            CellOutcome::Failed(msg) => RegionRow {
                error: Some(msg.clone()),
                ..base
            },
        }
    }
}

impl RegionRow {
    pub fn to_cell(&self) -> Cell {
        let key = CellKey {
            smf_length_m: self.smf_length_m,
            gain_per_km: self.gain_per_km,
            seed: self.seed,
        };
        let outcome = match StateLabel::parse(&self.label) {
            Some(label) => CellOutcome::Classified(CellSummary {
                label,
                pulse_count: self.pulse_count.unwrap_or(0),
                depth_max: self.depth_max.unwrap_or(0.0),
                fwhm_ps: self.fwhm_ps.unwrap_or(0.0),
                bandwidth_nm: self.bandwidth_nm.unwrap_or(0.0),
                round_trips: self.round_trips.unwrap_or(0),
            }),
            None => CellOutcome::Failed(self.error.clone().unwrap_or_else(|| self.label.clone())),
        };
        Cell {
            key,
            net_dispersion_ps2: self.net_dispersion_ps2,
            outcome,
            classification: None,
        }
    }
}

/// Writes `# key = value` header lines followed by the CSV body.
pub fn write_region_map<W: Write>(mut w: W, header: &[(String, String)], map: &RegionMap) -> CsvResult<()> {
    for (k, v) in header {
        writeln!(w, "# {k} = {v}")?;
    }
    let mut out = csv::Writer::from_writer(w);
    for c in &map.cells {
        out.serialize(RegionRow::from(c))?;
    }
    out.flush()?;
    Ok(())
}

pub fn read_region_map<R: Read>(r: R) -> CsvResult<RegionMap> {
    let rows: Vec<RegionRow> = csv::ReaderBuilder::new()
        .comment(Some(b'#'))
        .from_reader(r)
        .deserialize()
        .collect::<CsvResult<_>>()?;
    Ok(RegionMap {
        cells: rows.iter().map(RegionRow::to_cell).collect(),
    })
}
