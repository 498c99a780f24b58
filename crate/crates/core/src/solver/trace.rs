use thiserror::Error;

/// Fixed leading columns of the trace CSV; `x_mean_0 .. x_mean_{q-1}`
/// follow.
pub const TRACE_COLUMNS: [&str; 6] = [
    "k",
    "e_opt",
    "e_cons",
    "e_track",
    "raw_consensus",
    "mapping_norm",
];

#[derive(Debug, Error)]
pub enum TraceError {
    #[error("trace csv: {0}")]
    Csv(#[from] csv::Error),
    #[error("trace header: {0}")]
    Header(String),
    #[error("trace row {row}: {message}")]
    Row { row: usize, message: String },
    #[error("trace has no rows")]
    Empty,
}

/// One recorded iteration.
#[derive(Debug, Clone, PartialEq)]
pub struct TraceRow {
    pub k: usize,
    /// `‖1x̄ − 1x*‖_F`, present only when a reference solution is known.
    pub e_opt: Option<f64>,
    pub e_cons: f64,
    pub e_track: f64,
    pub raw_consensus: f64,
    pub mapping_norm: f64,
    /// `x̄ = uᵀx`, the consensus-weighted decision.
    pub x_mean: Vec<f64>,
}

impl TraceRow {
    /// `(e_opt, e_cons, e_track)`; `None` without a reference solution.
    pub fn error_vector(&self) -> Option<[f64; 3]> {
        self.e_opt.map(|e| [e, self.e_cons, self.e_track])
    }

    /// Sum of the available error norms.
    pub fn total_error(&self) -> f64 {
        self.e_opt.unwrap_or(0.0) + self.e_cons + self.e_track
    }
}

#[derive(Debug, Clone, Default, PartialEq)]
pub struct IterateTrace {
    pub rows: Vec<TraceRow>,
}

impl IterateTrace {
    pub fn decision_dim(&self) -> usize {
        self.rows.first().map_or(0, |r| r.x_mean.len())
    }

    pub fn to_csv(&self) -> Result<String, TraceError> {
        let mut w = csv::Writer::from_writer(Vec::new());
        let q = self.decision_dim();
        let mut header: Vec<String> = TRACE_COLUMNS.iter().map(|s| s.to_string()).collect();
        header.extend((0..q).map(|c| format!("x_mean_{c}")));
        w.write_record(&header)?;
        for row in &self.rows {
            let mut rec = vec![
                row.k.to_string(),
                row.e_opt.map(|e| e.to_string()).unwrap_or_default(),
                row.e_cons.to_string(),
                row.e_track.to_string(),
                row.raw_consensus.to_string(),
                row.mapping_norm.to_string(),
            ];
            rec.extend(row.x_mean.iter().map(f64::to_string));
            w.write_record(&rec)?;
        }
        let bytes = w.into_inner().map_err(|e| TraceError::Csv(e.into_error().into()))?;
        Ok(String::from_utf8(bytes).expect("csv output is utf-8"))
    }

    pub fn parse_csv(text: &str) -> Result<Self, TraceError> {
        let mut reader = csv::ReaderBuilder::new()
            .has_headers(true)
            .from_reader(text.as_bytes());
        let header = reader.headers()?.clone();
        if header.len() < TRACE_COLUMNS.len()
            || header.iter().zip(TRACE_COLUMNS).any(|(a, b)| a != b)
        {
            return Err(TraceError::Header(format!(
                "expected leading columns {}",
                TRACE_COLUMNS.join(",")
            )));
        }
        let q = header.len() - TRACE_COLUMNS.len();
        for (c, name) in header.iter().skip(TRACE_COLUMNS.len()).enumerate() {
            if name != format!("x_mean_{c}") {
                return Err(TraceError::Header(format!(
                    "column {} should be x_mean_{c}, found `{name}`",
                    TRACE_COLUMNS.len() + c
                )));
            }
        }
        let mut rows = Vec::new();
        for (idx, rec) in reader.records().enumerate() {
            let rec = rec?;
            let row_no = idx + 1;
            let err = |message: String| TraceError::Row {
                row: row_no,
                message,
            };
            let num = |i: usize| -> Result<f64, TraceError> {
                let field = &rec[i];
                let v: f64 = field
                    .trim()
                    .parse()
                    .map_err(|_| err(format!("column {} is not a number: `{field}`", &header[i])))?;
                if v.is_nan() || v < 0.0 && i < TRACE_COLUMNS.len() {
                    return Err(err(format!("column {} must be nonnegative", &header[i])));
                }
                Ok(v)
            };
            let k = rec[0]
                .trim()
                .parse::<usize>()
                .map_err(|_| err(format!("bad iteration index `{}`", &rec[0])))?;
            if let Some(prev) = rows.last().map(|r: &TraceRow| r.k) {
                if k <= prev {
                    return Err(err(format!("iteration {k} does not increase")));
                }
            }
            let e_opt = if rec[1].trim().is_empty() {
                None
            } else {
                Some(num(1)?)
            };
            let x_mean = (0..q)
                .map(|c| num(TRACE_COLUMNS.len() + c))
                .collect::<Result<Vec<_>, _>>()?;
            rows.push(TraceRow {
                k,
                e_opt,
                e_cons: num(2)?,
                e_track: num(3)?,
                raw_consensus: num(4)?,
                mapping_norm: num(5)?,
                x_mean,
            });
        }
        if rows.is_empty() {
            return Err(TraceError::Empty);
        }
        Ok(Self { rows })
    }
}
