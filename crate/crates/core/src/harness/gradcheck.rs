use crate::dataset::DatasetRecord;
use crate::graph_encoder::{encode_graph, score};
use crate::kb::{KbSchema, KnowledgeBase};
use crate::lexicon::{parse_lexicon, SenseLexicon};
use crate::model::{Model, ModelConfig, ModelError, Vocabularies};
use crate::numerics::{finite_diff_check, GradCheckReport, NumericsError, Tape, Var};
use crate::query_graph::{parse_logical_form, QueryGraph};
use crate::question_encoder::encode_question;

/// Large enough that the hinge never clips, since cosines lie in [-1, 1].
pub const GRAD_CHECK_MARGIN: f64 = 2.0;
pub const GRAD_CHECK_TOLERANCE: f64 = 1e-4;
const STEP: f64 = 1e-5;

const KB: &str = "\
obama\tposition_held\tpresident
obama\tspouse\tmichelle
obama\tlabel\t\"barack obama\"
michelle\tlabel\t\"michelle obama\"
president\tlabel\t\"president\"
";

const LEXICON: &str = "\
spouse: spouse.n.01 = spouse, partner, wife
spouse: spouse.n.02 = mate

position: position.n.01 = position, post
position: position.n.02 = place, spot
";

const QUESTION: &str = "id=gc\ttext=who married president\ttokens=who;married;president\t\
    dep=2:nsubj;0:root;2:obj\tentities=2-3:president\tanswers=michelle";

const POSITIVE: &str = "(?v0)-[position_held]->(president) ; (?v0)-[spouse]->(?q)";
const NEGATIVE: &str = "(?q)-[position_held]->(president) ; (?q)-[spouse]->(?v0)";

/// A three-token question with one positive and one negative two-edge graph.
#[derive(Debug, Clone)]
pub struct GradCheckInstance {
    pub kb: KnowledgeBase,
    pub record: DatasetRecord,
    pub positive: QueryGraph,
    pub negative: QueryGraph,
    pub model: Model,
}

pub fn grad_check_instance(config: ModelConfig, seed: u64) -> Result<GradCheckInstance, ModelError> {
    let data = |e: String| ModelError::Data(e);
    let kb = KnowledgeBase::parse_triples(KB, KbSchema::default()).map_err(|e| data(e.to_string()))?;
    let record = DatasetRecord::parse_line(QUESTION).map_err(data)?;
    let lexicon: SenseLexicon = parse_lexicon(LEXICON).map_err(|e| data(e.to_string()))?;
    let positive = parse_logical_form(POSITIVE).map_err(|e| data(e.to_string()))?;
    let negative = parse_logical_form(NEGATIVE).map_err(|e| data(e.to_string()))?;
    let vocab = Vocabularies::collect(&kb, std::slice::from_ref(&record), &lexicon);
    let model = Model::init(config, vocab, lexicon, None, seed)?;
    Ok(GradCheckInstance { kb, record, positive, negative, model })
}

fn to_numerics(e: ModelError) -> NumericsError {
    match e {
        ModelError::Numerics(n) => n,
        ModelError::Degenerate => NumericsError::ZeroVector("score"),
        ModelError::Data(m) => NumericsError::Domain(m),
    }
}

impl GradCheckInstance {
    /// `max(0, λ − s⁺ + s⁻)` on an inference tape.
    pub fn loss(&self, tape: &mut Tape<'_>) -> Result<Var, ModelError> {
        let m = &self.model;
        let q = encode_question(tape, m, &self.record)?;
        let pos = encode_graph(tape, m, &self.kb, &self.positive, q.e_avg)?;
        let s_pos = score(tape, q.h_q, pos.h_whole)?;
        let neg = encode_graph(tape, m, &self.kb, &self.negative, q.e_avg)?;
        let s_neg = score(tape, q.h_q, neg.h_whole)?;
        let margin = tape.constant(crate::numerics::Tensor::scalar(GRAD_CHECK_MARGIN));
        let gap = tape.sub(margin, s_pos)?;
        let pre = tape.add(gap, s_neg)?;
        Ok(tape.relu(pre))
    }
}

/// Central differences against backprop for every parameter of the full scoring path.
pub fn grad_check(seed: u64) -> Result<GradCheckReport, ModelError> {
    let config = ModelConfig { dropout: 0.0, ..ModelConfig::default() };
    let mut inst = grad_check_instance(config, seed)?;
    let mut params = std::mem::take(&mut inst.model.params);
    let report = finite_diff_check(
        |tape| inst.loss(tape).map_err(to_numerics),
        &mut params,
        STEP,
        GRAD_CHECK_TOLERANCE,
    )?;
    inst.model.params = params;
    Ok(report)
}
