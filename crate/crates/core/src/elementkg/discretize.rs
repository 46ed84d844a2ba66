use super::table::{AttributeKind, ElementTable};
use super::ElementKgError;

/// Equal-width binning rule for one continuous attribute.
///
/// `edges` has `bins + 1` strictly increasing entries with `edges[0]` the
/// range minimum and `edges[bins]` the maximum. Bin `i` covers
/// `[edges[i], edges[i+1])`, except the last bin which is closed above.
#[derive(Debug, Clone, PartialEq)]
pub struct DiscretizationRule {
    pub attribute: String,
    pub bins: usize,
    pub edges: Vec<f64>,
}

impl DiscretizationRule {
    pub fn equal_width(
        attribute: &str,
        min: f64,
        max: f64,
        bins: usize,
    ) -> Result<Self, ElementKgError> {
        if bins == 0 {
            return Err(ElementKgError::InvalidSchema(format!(
                "attribute {attribute}: need at least one bin"
            )));
        }
        if !(min.is_finite() && max.is_finite() && min < max) {
            return Err(ElementKgError::InvalidSchema(format!(
                "attribute {attribute}: bad range [{min}, {max}]"
            )));
        }
        let width = (max - min) / bins as f64;
        let mut edges: Vec<f64> = (0..=bins).map(|i| min + width * i as f64).collect();
        edges[bins] = max;
        Ok(Self {
            attribute: attribute.to_string(),
            bins,
            edges,
        })
    }
}

/// Result of binning one value.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Binned {
    pub index: usize,
    /// Set when the value fell outside the rule's range and was clamped to an
    /// end bin.
    pub clamped: bool,
}

/// Maps a value to its bin under `rule`. Out-of-range values clamp to the
/// nearest end bin with the `clamped` flag raised; non-finite values error.
pub fn discretize(value: f64, rule: &DiscretizationRule) -> Result<Binned, ElementKgError> {
    if !value.is_finite() {
        return Err(ElementKgError::NonFiniteInput {
            attribute: rule.attribute.clone(),
        });
    }
    let min = rule.edges[0];
    let max = rule.edges[rule.bins];
    if value < min {
        return Ok(Binned {
            index: 0,
            clamped: true,
        });
    }
    if value > max {
        return Ok(Binned {
            index: rule.bins - 1,
            clamped: true,
        });
    }
    // Binary search over edges; the maximum lands in the last bin.
    let index = match rule
        .edges
        .binary_search_by(|e| e.partial_cmp(&value).expect("finite edges"))
    {
        Ok(i) => i.min(rule.bins - 1),
        Err(i) => i - 1,
    };
    Ok(Binned {
        index,
        clamped: false,
    })
}

/// One equal-width rule per continuous attribute of the table, `bins` bins
/// over the observed range, in schema order.
pub fn default_rules(
    table: &ElementTable,
    bins: usize,
) -> Result<Vec<DiscretizationRule>, ElementKgError> {
    let mut rules = Vec::new();
    for schema in table.schema() {
        if let AttributeKind::Continuous { min, max } = schema.kind {
            rules.push(DiscretizationRule::equal_width(
                &schema.name,
                min,
                max,
                bins,
            )?);
        }
    }
    Ok(rules)
}
