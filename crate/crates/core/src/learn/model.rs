//! Text model files.
//!
//! ```text
//! dynrank-model v1
//! template <hash>
//! gain <name>
//! <feature-name> TAB <value>
//! ```

use crate::error::{Error, Result};
use crate::features::{FeatureTemplate, WeightVector};
use crate::gains::ConcaveGain;

const MAGIC: &str = "dynrank-model v1";

#[derive(Debug, Clone, PartialEq)]
pub struct Model {
    pub template: FeatureTemplate,
    pub gain: ConcaveGain,
    pub weights: WeightVector,
}

impl Model {
    pub fn new(
        template: FeatureTemplate,
        gain: ConcaveGain,
        weights: WeightVector,
    ) -> Result<Self> {
        if weights.words.len() != template.word_dim() || weights.pairs.len() != template.pair_dim()
        {
            return Err(Error::DimensionMismatch {
                expected: template.word_dim() + template.pair_dim(),
                got: weights.dim(),
            });
        }
        Ok(Model {
            template,
            gain,
            weights,
        })
    }

    pub fn to_text(&self) -> String {
        let mut out = format!(
            "{MAGIC}\ntemplate {}\ngain {}\n",
            self.template.hash(),
            self.gain
        );
        let names = self
            .template
            .word_feature_names()
            .into_iter()
            .chain(self.template.pair_feature_names());
        for (name, value) in names.zip(self.weights.flat()) {
            out.push_str(&format!("{name}\t{value:?}\n"));
        }
        out
    }

    /// Parses a model written for `template`; a different template hash is rejected.
    pub fn from_text(text: &str, template: &FeatureTemplate) -> Result<Self> {
        let mut lines = text.lines().enumerate();
        let parse_err = |line: usize, message: String| Error::Parse {
            line: line + 1,
            message,
        };
        match lines.next() {
            Some((_, l)) if l.trim_end() == MAGIC => {}
            _ => return Err(Error::Model(format!("missing '{MAGIC}' header"))),
        }
        let hash = match lines.next() {
            Some((_, l)) => l
                .strip_prefix("template ")
                .ok_or_else(|| parse_err(1, "expected 'template <hash>'".into()))?
                .trim()
                .to_string(),
            None => return Err(Error::Model("truncated model file".into())),
        };
        if hash != template.hash() {
            return Err(Error::Model(format!(
                "template hash mismatch: model has {hash}, current template is {}",
                template.hash()
            )));
        }
        let gain = match lines.next() {
            Some((i, l)) => l
                .strip_prefix("gain ")
                .ok_or_else(|| parse_err(i, "expected 'gain <name>'".into()))?
                .trim()
                .parse::<ConcaveGain>()
                .map_err(|e| parse_err(i, e.to_string()))?,
            None => return Err(Error::Model("truncated model file".into())),
        };
        let names: Vec<String> = template
            .word_feature_names()
            .into_iter()
            .chain(template.pair_feature_names())
            .collect();
        let mut flat = Vec::with_capacity(names.len());
        for (i, line) in lines {
            if line.trim().is_empty() {
                continue;
            }
            let (name, value) = line
                .split_once('\t')
                .ok_or_else(|| parse_err(i, "expected 'name<TAB>value'".into()))?;
            let expected = names
                .get(flat.len())
                .ok_or_else(|| parse_err(i, "more weights than template features".into()))?;
            if name != expected {
                return Err(parse_err(
                    i,
                    format!("expected feature {expected}, found {name}"),
                ));
            }
            let v: f64 = value
                .trim()
                .parse()
                .map_err(|_| parse_err(i, format!("bad weight '{value}'")))?;
            if !v.is_finite() {
                return Err(parse_err(i, format!("non-finite weight {v}")));
            }
            flat.push(v);
        }
        if flat.len() != names.len() {
            return Err(Error::Model(format!(
                "model lists {} weights, template has {}",
                flat.len(),
                names.len()
            )));
        }
        let weights = WeightVector::from_flat(&flat, template)?;
        Model::new(template.clone(), gain, weights)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn sample() -> Model {
        let t = FeatureTemplate::default();
        let flat: Vec<f64> = (0..t.word_dim() + t.pair_dim())
            .map(|k| (k as f64 - 7.0) / 3.0)
            .collect();
        let w = WeightVector::from_flat(&flat, &t).unwrap();
        Model::new(t, ConcaveGain::Sqrt, w).unwrap()
    }

    #[test]
    fn round_trip_exact() {
        let m = sample();
        let back = Model::from_text(&m.to_text(), &m.template).unwrap();
        assert_eq!(back, m);
    }

    #[test]
    fn template_mismatch_rejected() {
        let m = sample();
        let other = FeatureTemplate::from_config("cosine_bins = [0.3]").unwrap();
        assert!(matches!(
            Model::from_text(&m.to_text(), &other),
            Err(Error::Model(_))
        ));
    }

    #[test]
    fn malformed_rejected() {
        let m = sample();
        let t = &m.template;
        assert!(Model::from_text("", t).is_err());
        let text = m.to_text();
        let truncated: String = text.lines().take(10).map(|l| format!("{l}\n")).collect();
        assert!(Model::from_text(&truncated, t).is_err());
        let bad = text.replacen("\t-2.3333333333333335", "\tabc", 1);
        assert_ne!(bad, text);
        assert!(Model::from_text(&bad, t).is_err());
    }
}
