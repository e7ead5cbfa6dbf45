//! Prompt texts for the remote oracle. Each system prompt fixes the reply
//! format that [`super::parse_answer_payload`] reads.

use crate::graph::{CausalEdge, SceneObject, SpatialRelation};

fn vocabulary() -> String {
    SpatialRelation::ALL
        .iter()
        .map(|r| r.as_str())
        .collect::<Vec<_>>()
        .join(", ")
}

pub fn causal_order_system() -> String {
    format!(
        "You build scene graphs for 3D layouts. An edge [a, relation, b] means a is placed \
relative to b, so a depends on b.\n\
Relations allowed: {vocab}.\n\
Rules:\n\
- If an edge points from the supporting object to the supported one, flip it and \
replace the relation with its converse, e.g. [\"table\", \"under\", \"cup\"] becomes \
[\"cup\", \"on\", \"table\"].\n\
- Prefer the larger object as the target. Dependency direction wins over size.\n\
- Give every object at least one edge and keep the graph free of cycles.\n\
Reply with <Answer>edges = [[obj_1, word_1, obj_2], [obj_2, word_4, obj_3], ...]</Answer>.",
        vocab = vocabulary()
    )
}

pub fn dims_system() -> &'static str {
    "Estimate real-world sizes of objects in centimeters. \
Reply with <Answer>dims = [[name, length, width, height], ...]</Answer>, \
one entry per object, numbers only."
}

pub fn confidence_system() -> &'static str {
    "Rate how plausible a spatial relation between two objects is in an everyday scene, \
from 0 (impossible) to 100 (certain). \
Reply with <Answer>The score is: X</Answer>."
}

pub fn intervention_system(candidates: &[SpatialRelation]) -> String {
    let list = candidates
        .iter()
        .map(|r| r.as_str())
        .collect::<Vec<_>>()
        .join(", ");
    format!(
        "You check spatial relations in a rendered scene. Decide whether the labeled relation \
is physically sound and matches common arrangements.\n\
If it is, answer keep. If it is wrong but fixable, answer modify and pick a relation \
from: {list}.\n\
Reply with JSON only: {{\"action\": \"keep\" | \"modify\", \"updated_relation\": \"new_relation\"}}"
    )
}

pub fn scale_system() -> &'static str {
    "You judge the relative size of two objects in a rendered scene. \
Give a score from -100 to 100 for the first object: 0 means its size is right, \
positive means it is too large, negative means it is too small. \
Reply with <Answer>The score is: X</Answer>, where X is the score. \
For example <Answer>The score is: 25</Answer>."
}

pub fn position_system() -> &'static str {
    "You judge the position of the first object relative to the second in a rendered scene, \
one score per axis from -100 to 100 (x to the right, y to the front, z up). \
0 means correct; positive means the object is displaced toward the positive axis. \
Reply with <Answer>The score-1 is: XX. The score-2 is: YY. The score-3 is: ZZ</Answer>."
}

pub fn describe(o: &SceneObject) -> String {
    format!(
        "{} (Length: {} cm, Width: {} cm, Height: {} cm)",
        o.id, o.dims.length_cm, o.dims.width_cm, o.dims.height_cm
    )
}

pub fn edge_text(e: &CausalEdge) -> String {
    format!("['{}', '{}', '{}']", e.subject, e.relation, e.target)
}

pub fn pair_user(a: &SceneObject, b: &SceneObject) -> String {
    format!(
        "Objects: {}; {}.\nGive the single edge between them.",
        describe(a),
        describe(b)
    )
}

pub fn scene_user(prompt: &str) -> String {
    format!("Scene description: {prompt}\nList the objects and their edges.")
}

pub fn dims_user(names: &[String]) -> String {
    format!("Objects: {}.", names.join(", "))
}

pub fn edge_user(e: &CausalEdge, subject: &SceneObject, target: &SceneObject) -> String {
    format!(
        "Edge: {}\nSubject: {}\nTarget: {}",
        edge_text(e),
        describe(subject),
        describe(target)
    )
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn prompts_carry_formats() {
        let order = causal_order_system();
        for r in SpatialRelation::ALL {
            assert!(order.contains(r.as_str()));
        }
        assert!(order.contains("<Answer>edges = ["));
        assert!(intervention_system(&[SpatialRelation::On]).contains("\"action\""));
        assert!(scale_system().contains("<Answer>The score is: X</Answer>"));
        assert!(position_system().contains("score-3"));
    }
}
