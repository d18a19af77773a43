use nalgebra::DMatrix;

use crate::error::{Error, Result};

#[derive(Debug, Clone, PartialEq)]
pub struct ScalarEntry {
    pub name: String,
    pub lower: f64,
    pub upper: f64,
}

impl ScalarEntry {
    pub fn new(name: impl Into<String>, lower: f64, upper: f64) -> Self {
        Self { name: name.into(), lower, upper }
    }
}

/// A matrix-valued external variable with a common entry box.
#[derive(Debug, Clone, PartialEq)]
pub struct GainBlock {
    pub name: String,
    pub rows: usize,
    pub cols: usize,
    pub entry_lower: f64,
    pub entry_upper: f64,
}

impl GainBlock {
    pub fn new(name: impl Into<String>, rows: usize, cols: usize, lower: f64, upper: f64) -> Self {
        Self { name: name.into(), rows, cols, entry_lower: lower, entry_upper: upper }
    }

    pub fn len(&self) -> usize {
        self.rows * self.cols
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }
}

/// Plant data that lets a gain block be recovered from a prescribed pole
/// vector: the closed-loop matrix is `A + B·F·C` and poles are drawn from the
/// box `[-sigma_min, 0] × [-omega_max, omega_max]`.
#[derive(Debug, Clone, PartialEq)]
pub struct PoleChannel {
    pub a: DMatrix<f64>,
    pub b: DMatrix<f64>,
    pub c: DMatrix<f64>,
    pub sigma_min: f64,
    pub omega_max: f64,
    /// Index into `VariableLayout::gain_blocks` of the gain this channel drives.
    pub gain_block: usize,
}

/// Classification metadata for the external variable: which entries exist,
/// their bounds, and how they may be sampled.
#[derive(Debug, Clone, PartialEq)]
pub struct VariableLayout {
    scalar_entries: Vec<ScalarEntry>,
    gain_blocks: Vec<GainBlock>,
    pole_channels: Vec<PoleChannel>,
    subspace_scales: Vec<f64>,
}

/// Unpacked view of an external variable.
#[derive(Debug, Clone, PartialEq)]
pub struct StructuredParts {
    pub scalars: Vec<f64>,
    pub gains: Vec<DMatrix<f64>>,
}

/// The flat external variable. Entry order: scalars in declaration order,
/// then each gain block row-major in declaration order.
#[derive(Debug, Clone, PartialEq)]
pub struct ExternalVariable {
    pub values: Vec<f64>,
}

impl VariableLayout {
    pub fn new(scalar_entries: Vec<ScalarEntry>, gain_blocks: Vec<GainBlock>) -> Result<Self> {
        for s in &scalar_entries {
            if !(s.lower <= s.upper) {
                return Err(Error::structural(format!(
                    "scalar `{}` has lower bound {} above upper bound {}",
                    s.name, s.lower, s.upper
                )));
            }
        }
        for g in &gain_blocks {
            if !(g.entry_lower <= g.entry_upper) {
                return Err(Error::structural(format!(
                    "gain `{}` has lower bound {} above upper bound {}",
                    g.name, g.entry_lower, g.entry_upper
                )));
            }
        }
        let layout = Self {
            scalar_entries,
            gain_blocks,
            pole_channels: Vec::new(),
            subspace_scales: vec![1.0],
        };
        if layout.dim() == 0 {
            return Err(Error::structural("external variable has dimension 0"));
        }
        Ok(layout)
    }

    pub fn with_subspace_scales(mut self, scales: Vec<f64>) -> Result<Self> {
        if scales.is_empty() {
            return Err(Error::structural("subspace scale list is empty"));
        }
        if let Some(bad) = scales.iter().find(|&&k| !(k > 0.0 && k <= 1.0)) {
            return Err(Error::structural(format!("subspace scale {bad} outside (0, 1]")));
        }
        self.subspace_scales = scales;
        Ok(self)
    }

    /// Adds a pole channel. Each gain block can be driven by at most one.
    pub fn with_pole_channel(mut self, channel: PoleChannel) -> Result<Self> {
        if self.pole_channels.iter().any(|c| c.gain_block == channel.gain_block) {
            return Err(Error::structural(format!(
                "gain block {} already has a pole channel",
                channel.gain_block
            )));
        }
        let gain = self.gain_blocks.get(channel.gain_block).ok_or_else(|| {
            Error::structural(format!("pole channel refers to missing gain block {}", channel.gain_block))
        })?;
        let n = channel.a.nrows();
        if !channel.a.is_square()
            || channel.b.nrows() != n
            || channel.c.ncols() != n
            || channel.b.ncols() != gain.rows
            || channel.c.nrows() != gain.cols
        {
            return Err(Error::structural(format!(
                "pole channel shapes A {:?}, B {:?}, C {:?} do not match gain `{}` ({}x{})",
                channel.a.shape(),
                channel.b.shape(),
                channel.c.shape(),
                gain.name,
                gain.rows,
                gain.cols
            )));
        }
        if !(channel.sigma_min > 0.0) || !(channel.omega_max >= 0.0) {
            return Err(Error::structural("pole box needs sigma_min > 0 and omega_max >= 0"));
        }
        self.pole_channels.push(channel);
        Ok(self)
    }

    pub fn scalar_entries(&self) -> &[ScalarEntry] {
        &self.scalar_entries
    }

    pub fn gain_blocks(&self) -> &[GainBlock] {
        &self.gain_blocks
    }

    /// The first pole channel, if any.
    pub fn pole_channel(&self) -> Option<&PoleChannel> {
        self.pole_channels.first()
    }

    pub fn pole_channels(&self) -> &[PoleChannel] {
        &self.pole_channels
    }

    pub fn subspace_scales(&self) -> &[f64] {
        &self.subspace_scales
    }

    pub fn dim(&self) -> usize {
        self.scalar_entries.len() + self.gain_blocks.iter().map(GainBlock::len).sum::<usize>()
    }

    /// Offset of gain block `k` inside the flat vector.
    pub fn gain_offset(&self, k: usize) -> usize {
        self.scalar_entries.len() + self.gain_blocks[..k].iter().map(GainBlock::len).sum::<usize>()
    }

    /// Per-entry `(lower, upper)` bounds in flat order.
    pub fn bounds(&self) -> Vec<(f64, f64)> {
        let mut out: Vec<_> = self.scalar_entries.iter().map(|s| (s.lower, s.upper)).collect();
        for g in &self.gain_blocks {
            out.extend(std::iter::repeat_n((g.entry_lower, g.entry_upper), g.len()));
        }
        out
    }

    pub fn pack(&self, parts: &StructuredParts) -> Result<ExternalVariable> {
        if parts.scalars.len() != self.scalar_entries.len() {
            return Err(Error::structural(format!(
                "expected {} scalars, got {}",
                self.scalar_entries.len(),
                parts.scalars.len()
            )));
        }
        if parts.gains.len() != self.gain_blocks.len() {
            return Err(Error::structural(format!(
                "expected {} gain blocks, got {}",
                self.gain_blocks.len(),
                parts.gains.len()
            )));
        }
        let mut values = parts.scalars.clone();
        for (g, m) in self.gain_blocks.iter().zip(&parts.gains) {
            if m.shape() != (g.rows, g.cols) {
                return Err(Error::structural(format!(
                    "gain `{}` expected {}x{}, got {}x{}",
                    g.name,
                    g.rows,
                    g.cols,
                    m.nrows(),
                    m.ncols()
                )));
            }
            for i in 0..g.rows {
                for j in 0..g.cols {
                    values.push(m[(i, j)]);
                }
            }
        }
        Ok(ExternalVariable { values })
    }

    pub fn unpack(&self, alpha: &ExternalVariable) -> Result<StructuredParts> {
        self.check(alpha)?;
        let ns = self.scalar_entries.len();
        let scalars = alpha.values[..ns].to_vec();
        let gains = (0..self.gain_blocks.len()).map(|k| self.gain(alpha, k)).collect();
        Ok(StructuredParts { scalars, gains })
    }

    pub fn check(&self, alpha: &ExternalVariable) -> Result<()> {
        if alpha.values.len() != self.dim() {
            return Err(Error::structural(format!(
                "external variable has {} entries, layout needs {}",
                alpha.values.len(),
                self.dim()
            )));
        }
        Ok(())
    }

    /// Gain block `k` of a conforming external variable.
    pub fn gain(&self, alpha: &ExternalVariable, k: usize) -> DMatrix<f64> {
        let g = &self.gain_blocks[k];
        let off = self.gain_offset(k);
        DMatrix::from_row_slice(g.rows, g.cols, &alpha.values[off..off + g.len()])
    }

    /// Writes a gain matrix into the slots of block `k`.
    pub fn set_gain(&self, values: &mut [f64], k: usize, gain: &DMatrix<f64>) {
        let g = &self.gain_blocks[k];
        let off = self.gain_offset(k);
        for i in 0..g.rows {
            for j in 0..g.cols {
                values[off + i * g.cols + j] = gain[(i, j)];
            }
        }
    }
}

impl ExternalVariable {
    pub fn new(values: Vec<f64>) -> Self {
        Self { values }
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn scalar_and_gain() -> VariableLayout {
        VariableLayout::new(
            vec![ScalarEntry::new("s", 0.0, 10.0)],
            vec![GainBlock::new("F", 1, 2, -50.0, 50.0)],
        )
        .unwrap()
    }

    #[test]
    fn pack_order_is_scalars_then_row_major_gains() {
        let layout = scalar_and_gain();
        let parts = StructuredParts {
            scalars: vec![1.5],
            gains: vec![DMatrix::from_row_slice(1, 2, &[2.0, 3.0])],
        };
        let alpha = layout.pack(&parts).unwrap();
        assert_eq!(alpha.values, vec![1.5, 2.0, 3.0]);
        assert_eq!(layout.unpack(&alpha).unwrap(), parts);
    }

    #[test]
    fn scalar_only_layout() {
        let layout = VariableLayout::new(vec![ScalarEntry::new("a", -1.0, 1.0)], vec![]).unwrap();
        let alpha = layout.pack(&StructuredParts { scalars: vec![0.0], gains: vec![] }).unwrap();
        assert_eq!(alpha.values, vec![0.0]);
    }

    #[test]
    fn dimension_mismatch_is_structural() {
        let layout = scalar_and_gain();
        let bad = StructuredParts {
            scalars: vec![1.0],
            gains: vec![DMatrix::zeros(2, 1)],
        };
        assert!(matches!(layout.pack(&bad), Err(Error::Structural(_))));
        assert!(matches!(
            layout.unpack(&ExternalVariable::new(vec![1.0])),
            Err(Error::Structural(_))
        ));
    }

    #[test]
    fn invalid_layouts_rejected() {
        assert!(VariableLayout::new(vec![ScalarEntry::new("a", 1.0, 0.0)], vec![]).is_err());
        assert!(VariableLayout::new(vec![], vec![]).is_err());
        let l = VariableLayout::new(vec![ScalarEntry::new("a", 0.0, 1.0)], vec![]).unwrap();
        assert!(l.clone().with_subspace_scales(vec![]).is_err());
        assert!(l.clone().with_subspace_scales(vec![0.0]).is_err());
        assert!(l.clone().with_subspace_scales(vec![1.5]).is_err());
        assert!(l.with_subspace_scales(vec![1.0, 0.5, 0.1]).is_ok());
    }

    #[test]
    fn pole_channel_shape_checked() {
        let layout = scalar_and_gain();
        let ok = PoleChannel {
            a: DMatrix::from_row_slice(2, 2, &[0.0, 1.0, 0.0, 0.0]),
            b: DMatrix::from_row_slice(2, 1, &[0.0, 1.0]),
            c: DMatrix::identity(2, 2),
            sigma_min: 20.0,
            omega_max: 20.0,
            gain_block: 0,
        };
        assert!(layout.clone().with_pole_channel(ok.clone()).is_ok());
        let bad = PoleChannel { c: DMatrix::identity(3, 3), ..ok };
        assert!(layout.with_pole_channel(bad).is_err());
    }

    fn layout_and_values() -> impl Strategy<Value = (VariableLayout, Vec<f64>)> {
        (
            0usize..4,
            prop::collection::vec((1usize..4, 1usize..4), 0..3),
        )
            .prop_filter("nonempty", |(s, g)| *s + g.len() > 0)
            .prop_flat_map(|(ns, gains)| {
                let scalars: Vec<_> = (0..ns).map(|i| ScalarEntry::new(format!("s{i}"), -1.0, 1.0)).collect();
                let blocks: Vec<_> = gains
                    .iter()
                    .enumerate()
                    .map(|(i, &(r, c))| GainBlock::new(format!("F{i}"), r, c, -1.0, 1.0))
                    .collect();
                let layout = VariableLayout::new(scalars, blocks).unwrap();
                let dim = layout.dim();
                (Just(layout), prop::collection::vec(any::<f64>().prop_filter("finite", |x| x.is_finite()), dim))
            })
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(1000))]
        #[test]
        fn pack_unpack_roundtrip_is_bit_identical((layout, values) in layout_and_values()) {
            let alpha = ExternalVariable::new(values.clone());
            let parts = layout.unpack(&alpha).unwrap();
            let back = layout.pack(&parts).unwrap();
            prop_assert_eq!(
                back.values.iter().map(|x| x.to_bits()).collect::<Vec<_>>(),
                values.iter().map(|x| x.to_bits()).collect::<Vec<_>>()
            );
        }
    }
}
