//! Synthetic corpora with planted per-label accuracy, for validation and power
//! analysis.

use std::collections::BTreeMap;
use std::fs;
use std::path::{Path, PathBuf};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::attributes::{
    AttributeStore, Characteristic, CollapseTables, EntityRecord, DEFAULT_OTHERS_MIN,
};
use crate::corpus::{write_dataset, EntityMention, Mentions, QAExample};
use crate::error::{Error, Result};
use crate::features::demographic_feature_name;
use crate::pipeline::AuditConfig;

const WH: [&str; 6] = ["who", "what", "when", "where", "which", "how"];
const VOCAB: [&str; 32] = [
    "the", "first", "film", "award", "play", "in", "wrote", "famous", "theory", "won", "novel",
    "year", "born", "city", "song", "team", "record", "prize", "elected", "role", "book", "series",
    "discovered", "founded", "party", "season", "album", "law", "court", "war", "king", "river",
];

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LabelSpec {
    /// Raw attribute-store value, collapsed like any other.
    pub value: String,
    pub share: f64,
    /// Planted accuracy; the base accuracy when absent.
    #[serde(default)]
    pub accuracy: Option<f64>,
}

impl LabelSpec {
    pub fn new(value: &str, share: f64, accuracy: Option<f64>) -> Self {
        Self {
            value: value.to_owned(),
            share,
            accuracy,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SynthSpec {
    pub dataset_name: String,
    /// Dev examples.
    pub n: usize,
    pub n_train: usize,
    pub seed: u64,
    pub base_accuracy: f64,
    /// Distinct person entities examples are drawn from.
    pub entity_pool: usize,
    /// Share of examples without any person mention.
    pub no_person_share: f64,
    pub gender: Vec<LabelSpec>,
    pub nationality: Vec<LabelSpec>,
    pub profession: Vec<LabelSpec>,
}

impl Default for SynthSpec {
    fn default() -> Self {
        Self::preset("null").expect("null preset exists")
    }
}

impl SynthSpec {
    pub const PRESETS: [&'static str; 3] = ["null", "profession-gap", "gender-gap"];

    /// `null`: no planted effect. `profession-gap`: physicists answered at 0.8,
    /// other professions at 0.5. `gender-gap`: female 0.8, male 0.5.
    pub fn preset(name: &str) -> Option<Self> {
        let base = SynthSpec {
            dataset_name: "synth".into(),
            n: 2000,
            n_train: 2000,
            seed: 0,
            base_accuracy: 0.5,
            entity_pool: 600,
            no_person_share: 0.0,
            gender: vec![LabelSpec::new("male", 0.5, None), LabelSpec::new("female", 0.5, None)],
            nationality: vec![
                LabelSpec::new("united states", 0.4, None),
                LabelSpec::new("united kingdom", 0.3, None),
                LabelSpec::new("germany", 0.3, None),
            ],
            profession: vec![
                LabelSpec::new("physicist", 0.25, None),
                LabelSpec::new("actor", 0.25, None),
                LabelSpec::new("writer", 0.25, None),
                LabelSpec::new("politician", 0.25, None),
            ],
        };
        match name {
            "null" => Some(base),
            "profession-gap" => {
                let mut s = base;
                s.profession[0].accuracy = Some(0.8);
                Some(s)
            }
            "gender-gap" => {
                let mut s = base;
                s.n = 1000;
                s.gender[1].accuracy = Some(0.8);
                Some(s)
            }
            _ => None,
        }
    }

    pub fn from_file(path: &Path) -> Result<Self> {
        let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        toml::from_str(&text).map_err(|e| Error::Config(format!("{}: {e}", path.display())))
    }

    pub fn labels(&self, c: Characteristic) -> &[LabelSpec] {
        match c {
            Characteristic::Gender => &self.gender,
            Characteristic::Nationality => &self.nationality,
            Characteristic::Profession => &self.profession,
        }
    }

    pub fn validate(&self) -> Result<()> {
        let prob = |what: &str, p: f64| {
            if (0.0..=1.0).contains(&p) {
                Ok(())
            } else {
                Err(Error::Synth(format!("{what} must be in [0, 1], got {p}")))
            }
        };
        if self.n == 0 {
            return Err(Error::Synth("n must be at least 1".into()));
        }
        if self.entity_pool == 0 {
            return Err(Error::Synth("entity_pool must be at least 1".into()));
        }
        prob("base_accuracy", self.base_accuracy)?;
        prob("no_person_share", self.no_person_share)?;
        for c in Characteristic::ALL {
            let labels = self.labels(c);
            if labels.is_empty() {
                return Err(Error::Synth(format!("{c}: at least one label is required")));
            }
            for l in labels {
                if !(l.share >= 0.0 && l.share.is_finite()) {
                    return Err(Error::Synth(format!("{c} {:?}: share must be non-negative", l.value)));
                }
                if let Some(a) = l.accuracy {
                    prob(&format!("{c} {:?} accuracy", l.value), a)?;
                }
            }
            if labels.iter().map(|l| l.share).sum::<f64>() <= 0.0 {
                return Err(Error::Synth(format!("{c}: shares sum to zero")));
            }
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PlantedEffect {
    pub characteristic: Characteristic,
    pub value: String,
    pub label: String,
    pub feature: String,
    pub accuracy: f64,
    /// Log-odds shift relative to the base accuracy.
    pub log_odds: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RealizedCell {
    pub label: String,
    pub count: usize,
    pub correct: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Truth {
    pub seed: u64,
    pub n: usize,
    pub base_accuracy: f64,
    pub planted: Vec<PlantedEffect>,
    pub realized: BTreeMap<Characteristic, Vec<RealizedCell>>,
}

#[derive(Debug, Clone)]
pub struct SynthCorpus {
    pub dev: Vec<QAExample>,
    pub train: Vec<QAExample>,
    pub entities: Vec<EntityRecord>,
    pub truth: Truth,
}

impl SynthCorpus {
    pub fn store(&self) -> AttributeStore {
        AttributeStore::from_records(self.entities.iter().cloned())
    }
}

fn logit(p: f64) -> f64 {
    let p = p.clamp(1e-12, 1.0 - 1e-12);
    (p / (1.0 - p)).ln()
}

fn draw_index(rng: &mut ChaCha8Rng, labels: &[LabelSpec]) -> usize {
    let total: f64 = labels.iter().map(|l| l.share).sum();
    let u = rng.random::<f64>() * total;
    let mut acc = 0.0;
    for (i, l) in labels.iter().enumerate() {
        acc += l.share;
        if u < acc {
            return i;
        }
    }
    labels.iter().rposition(|l| l.share > 0.0).unwrap_or(0)
}

fn words(rng: &mut ChaCha8Rng, min: usize, max: usize) -> Vec<&'static str> {
    let len = rng.random_range(min..=max);
    (0..len).map(|_| VOCAB[rng.random_range(0..VOCAB.len())]).collect()
}

fn question(rng: &mut ChaCha8Rng) -> String {
    let mut tokens = words(rng, 3, 14);
    let wh = WH[rng.random_range(0..WH.len())];
    let at = if rng.random_bool(0.7) {
        0
    } else {
        rng.random_range(0..=tokens.len())
    };
    tokens.insert(at, wh);
    format!("{}?", tokens.join(" "))
}

struct Entity {
    record: EntityRecord,
    /// Index into each characteristic's label list.
    picks: [usize; 3],
}

/// Builds the corpus in memory. The correctness probability of an example is
/// the planted accuracy of its entity's label when exactly one applies, the
/// base accuracy when none does, and a log-odds sum otherwise.
pub fn synthesize(spec: &SynthSpec) -> Result<SynthCorpus> {
    spec.validate()?;
    let mut rng = ChaCha8Rng::seed_from_u64(spec.seed);

    let entities: Vec<Entity> = (0..spec.entity_pool)
        .map(|i| {
            let picks = [
                draw_index(&mut rng, &spec.gender),
                draw_index(&mut rng, &spec.nationality),
                draw_index(&mut rng, &spec.profession),
            ];
            let record = EntityRecord {
                entity_id: format!("Q{}", 1000 + i),
                name: format!("Person {i}"),
                gender: vec![spec.gender[picks[0]].value.clone()],
                nationality: vec![spec.nationality[picks[1]].value.clone()],
                profession: vec![spec.profession[picks[2]].value.clone()],
            };
            Entity { record, picks }
        })
        .collect();

    let probability = |e: &Entity| -> f64 {
        let planted: Vec<f64> = Characteristic::ALL
            .iter()
            .zip(e.picks)
            .filter_map(|(&c, i)| spec.labels(c)[i].accuracy)
            .collect();
        match planted.as_slice() {
            [] => spec.base_accuracy,
            [a] => *a,
            many => {
                let base = logit(spec.base_accuracy);
                let z = base + many.iter().map(|&a| logit(a) - base).sum::<f64>();
                1.0 / (1.0 + (-z).exp())
            }
        }
    };

    let example = |rng: &mut ChaCha8Rng, id: String, correct_p: Option<f64>, entity: Option<&Entity>| {
        let n_answers = if rng.random_bool(0.8) { 1 } else { rng.random_range(2..=4) };
        let mut mentions = Mentions::default();
        if let Some(e) = entity {
            let m = EntityMention::person(e.record.entity_id.clone(), e.record.name.clone());
            mentions.answer.push(m.clone());
            mentions.title.push(m);
        } else {
            mentions.question.push(EntityMention::other("Q1", "Earth"));
        }
        let p = correct_p.unwrap_or(spec.base_accuracy);
        QAExample {
            id,
            question: question(rng),
            answers: (0..n_answers).map(|k| format!("answer {k}")).collect(),
            doc_title: entity.map(|e| e.record.name.clone()).unwrap_or_else(|| "Earth".into()),
            correct: rng.random_bool(p),
            mentions,
            evidence_sentence: Some(words(rng, 6, 16).join(" ")),
        }
    };

    let mut dev = Vec::with_capacity(spec.n);
    let mut dev_entities = Vec::with_capacity(spec.n);
    for i in 0..spec.n {
        let entity = (!rng.random_bool(spec.no_person_share))
            .then(|| &entities[rng.random_range(0..entities.len())]);
        dev.push(example(&mut rng, format!("dev-{i:05}"), entity.map(probability), entity));
        dev_entities.push(entity);
    }
    let mut train = Vec::with_capacity(spec.n_train);
    for i in 0..spec.n_train {
        let entity = &entities[rng.random_range(0..entities.len())];
        train.push(example(&mut rng, format!("train-{i:05}"), None, Some(entity)));
    }

    let tables = CollapseTables::shipped();
    let mut planted = Vec::new();
    let mut realized = BTreeMap::new();
    for (k, c) in Characteristic::ALL.into_iter().enumerate() {
        for l in spec.labels(c) {
            if let Some(a) = l.accuracy {
                let label = tables.collapse(c, &l.value);
                planted.push(PlantedEffect {
                    characteristic: c,
                    value: l.value.clone(),
                    feature: demographic_feature_name(c, &label),
                    label,
                    accuracy: a,
                    log_odds: logit(a) - logit(spec.base_accuracy),
                });
            }
        }
        let mut cells: BTreeMap<String, (usize, usize)> = BTreeMap::new();
        for (ex, e) in dev.iter().zip(&dev_entities) {
            let label = match e {
                Some(e) => tables.collapse(c, &spec.labels(c)[e.picks[k]].value),
                None => crate::attributes::NOT_FOUND.to_owned(),
            };
            let cell = cells.entry(label).or_default();
            cell.0 += 1;
            cell.1 += usize::from(ex.correct);
        }
        realized.insert(
            c,
            cells
                .into_iter()
                .map(|(label, (count, correct))| RealizedCell { label, count, correct })
                .collect(),
        );
    }

    Ok(SynthCorpus {
        dev,
        train,
        entities: entities.into_iter().map(|e| e.record).collect(),
        truth: Truth {
            seed: spec.seed,
            n: spec.n,
            base_accuracy: spec.base_accuracy,
            planted,
            realized,
        },
    })
}

/// Writes `dev.jsonl`, `train.jsonl`, `kb.txt`, `truth.json` and a ready
/// `audit.toml` into `out_dir`.
pub fn generate_synthetic(spec: &SynthSpec, out_dir: &Path) -> Result<Vec<PathBuf>> {
    let corpus = synthesize(spec)?;
    fs::create_dir_all(out_dir).map_err(|e| Error::io(out_dir, e))?;
    let mut written = Vec::new();
    let mut put = |name: &str, bytes: Vec<u8>| -> Result<()> {
        let path = out_dir.join(name);
        fs::write(&path, bytes).map_err(|e| Error::io(&path, e))?;
        written.push(path);
        Ok(())
    };

    for (name, examples) in [("dev.jsonl", &corpus.dev), ("train.jsonl", &corpus.train)] {
        let mut buf = Vec::new();
        write_dataset(&mut buf, examples).map_err(|e| Error::io(Path::new(name), e))?;
        put(name, buf)?;
    }
    let mut kb = String::from("# entity_id|name|gender|nationality|profession\n");
    for r in &corpus.entities {
        kb.push_str(&r.to_row());
        kb.push('\n');
    }
    put("kb.txt", kb.into_bytes())?;
    let mut truth =
        serde_json::to_vec_pretty(&corpus.truth).map_err(|e| Error::Serialize(e.to_string()))?;
    truth.push(b'\n');
    put("truth.json", truth)?;

    let config = AuditConfig {
        dataset_name: Some(spec.dataset_name.clone()),
        dataset_dev: "dev.jsonl".into(),
        dataset_train: Some("train.jsonl".into()),
        kb: "kb.txt".into(),
        out: Some("report".into()),
        others_min: DEFAULT_OTHERS_MIN,
        seed: spec.seed,
        ..Default::default()
    };
    put("audit.toml", config.to_toml()?.into_bytes())?;
    log::info!("[synth] {} dev, {} train examples in {}", spec.n, spec.n_train, out_dir.display());
    Ok(written)
}
