use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use crate::call::{parse_action_call, CallError, SkillCall};
use crate::trace::Stage;

pub const SUCCESS_TOKEN: &str = "SUCCESSFUL";

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum ParseError {
    #[error("empty response")]
    Empty,
    #[error("missing section `{0}`")]
    MissingSection(String),
    #[error("malformed code block: {0}")]
    MalformedCodeBlock(String),
    #[error(transparent)]
    Call(#[from] CallError),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "stage", rename_all = "snake_case")]
pub enum StageResult {
    InfoGathering {
        image_description: String,
        target_name: Option<String>,
        target_reasoning: String,
        area_location: String,
    },
    Reflection {
        reasoning: String,
        success_detected: bool,
        failure_reason: Option<String>,
    },
    SubtaskProposal {
        history_summary: String,
        subtask_reasoning: String,
        subtask: String,
    },
    ActionPlanning {
        reasoning: String,
        action: Option<SkillCall>,
        key_reason: String,
    },
}

const INFO: [&str; 4] = ["Image Description", "Target Name", "Reasoning for Target", "Area Location"];
const REFLECTION: [&str; 2] = ["Self Reflection Reasoning", "Success Detection"];
const SUBTASK: [&str; 3] = ["History_summary", "Subtask_reasoning", "Subtask description"];
const ACTION: [&str; 4] = ["Decision_Making_Reasoning", "Actions", "Action", "Key_reason_of_last_action"];

/// Lowercase, `_` as space, markdown emphasis and heading marks removed.
fn normalize(title: &str) -> String {
    let t = title.replace("**", "").replace('_', " ");
    let t = t.trim().trim_start_matches('#').trim();
    t.split_whitespace().collect::<Vec<_>>().join(" ").to_ascii_lowercase()
}

/// Splits a response into titled sections. Only the given titles open a section;
/// a repeated title is kept as content of the section in progress.
fn sections(response: &str, titles: &[&str]) -> BTreeMap<&'static str, String> {
    let keys: Vec<(String, usize)> = titles.iter().enumerate().map(|(i, t)| (normalize(t), i)).collect();
    let mut out: BTreeMap<usize, String> = BTreeMap::new();
    let mut current: Option<usize> = None;
    for line in response.lines() {
        let header = if line.contains("```") { None } else { line.split_once(':') };
        let hit = header.and_then(|(head, rest)| {
            let n = normalize(head);
            keys.iter().find(|(k, _)| *k == n).map(|(_, i)| (*i, rest.replace("**", "")))
        });
        match hit {
            Some((i, rest)) if !out.contains_key(&i) => {
                out.insert(i, rest.trim().to_string());
                current = Some(i);
            }
            _ => {
                if let Some(i) = current {
                    let s = out.get_mut(&i).expect("current section exists");
                    if !s.is_empty() {
                        s.push('\n');
                    }
                    s.push_str(line);
                }
            }
        }
    }
    out.into_iter().map(|(i, s)| (static_title(titles[i]), s.trim().to_string())).collect()
}

fn static_title(t: &str) -> &'static str {
    INFO.iter().chain(&REFLECTION).chain(&SUBTASK).chain(&ACTION).find(|x| **x == t).copied().expect("known title")
}

fn take(map: &mut BTreeMap<&'static str, String>, title: &'static str) -> Result<String, ParseError> {
    map.remove(title).ok_or_else(|| ParseError::MissingSection(title.to_string()))
}

/// Interior of the first fenced block in `section`.
pub fn fenced_code(section: &str) -> Result<String, ParseError> {
    let mut lines = section.lines().skip_while(|l| !l.trim_start().starts_with("```"));
    let open = lines.next().ok_or_else(|| ParseError::MalformedCodeBlock("no fenced block".into()))?;
    let after = open.trim_start().trim_start_matches("```");
    // Single-line form: ```call()```
    if let Some(inner) = after.strip_suffix("```") {
        let inner = inner.trim();
        return Ok(inner.strip_prefix("python").map_or(inner, str::trim).to_string());
    }
    let mut body = Vec::new();
    for l in lines {
        if l.trim_start().starts_with("```") {
            return Ok(body.join("\n"));
        }
        body.push(l);
    }
    Err(ParseError::MalformedCodeBlock("unterminated fenced block".into()))
}

pub fn parse_stage(stage: Stage, response: &str) -> Result<StageResult, ParseError> {
    if response.trim().is_empty() {
        return Err(ParseError::Empty);
    }
    match stage {
        Stage::InfoGathering => {
            let mut s = sections(response, &INFO);
            let target = take(&mut s, "Target Name")?;
            let target = target.trim().trim_matches(|c| c == '"' || c == '\'' || c == '`').trim();
            Ok(StageResult::InfoGathering {
                image_description: take(&mut s, "Image Description")?,
                target_name: (!target.is_empty() && !target.eq_ignore_ascii_case("null")).then(|| target.to_string()),
                target_reasoning: take(&mut s, "Reasoning for Target")?,
                area_location: take(&mut s, "Area Location")?,
            })
        }
        Stage::Reflection => {
            let mut s = sections(response, &REFLECTION);
            let reasoning = take(&mut s, "Self Reflection Reasoning")?;
            let detection = take(&mut s, "Success Detection")?;
            let success_detected = detection.trim() == SUCCESS_TOKEN;
            Ok(StageResult::Reflection {
                reasoning,
                success_detected,
                failure_reason: (!success_detected && !detection.trim().is_empty()).then(|| detection.trim().to_string()),
            })
        }
        Stage::SubtaskProposal => {
            let mut s = sections(response, &SUBTASK);
            Ok(StageResult::SubtaskProposal {
                history_summary: take(&mut s, "History_summary")?,
                subtask_reasoning: take(&mut s, "Subtask_reasoning")?,
                subtask: take(&mut s, "Subtask description")?,
            })
        }
        Stage::ActionPlanning => {
            let mut s = sections(response, &ACTION);
            let (reasoning, code_section, key_reason) = match s.remove("Actions") {
                Some(actions) => (take(&mut s, "Decision_Making_Reasoning")?, actions, take(&mut s, "Key_reason_of_last_action")?),
                None => {
                    let action = s.remove("Action").ok_or_else(|| ParseError::MissingSection("Actions".into()))?;
                    (s.remove("Decision_Making_Reasoning").unwrap_or_default(), action, s.remove("Key_reason_of_last_action").unwrap_or_default())
                }
            };
            let code = fenced_code(&code_section)?;
            Ok(StageResult::ActionPlanning { reasoning, action: parse_action_call(&code)?, key_reason })
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::call::Literal;

    #[test]
    fn reflection_success_token() {
        let r = parse_stage(Stage::Reflection, "Self Reflection Reasoning:\n1. done\nSuccess Detection:\nSUCCESSFUL\n").unwrap();
        assert!(matches!(r, StageResult::Reflection { success_detected: true, failure_reason: None, .. }));
        let r = parse_stage(Stage::Reflection, "Self Reflection Reasoning:\nno\nSuccess Detection:\nsuccessful, mostly\n").unwrap();
        assert!(matches!(r, StageResult::Reflection { success_detected: false, failure_reason: Some(_), .. }));
    }

    #[test]
    fn null_target_is_none() {
        let text = "Image Description:\n1. a table\n2. a cup\nTarget Name:\nnull\nReasoning for Target:\nnothing needed\nArea Location:\noffice_area\n";
        let StageResult::InfoGathering { target_name, area_location, image_description, .. } = parse_stage(Stage::InfoGathering, text).unwrap()
        else {
            panic!()
        };
        assert_eq!(target_name, None);
        assert_eq!(area_location, "office_area");
        assert_eq!(image_description, "1. a table\n2. a cup");
    }

    #[test]
    fn missing_area_location() {
        let text = "Image Description:\nx\nTarget Name:\ncup\nReasoning for Target:\ny\n";
        assert_eq!(parse_stage(Stage::InfoGathering, text), Err(ParseError::MissingSection("Area Location".into())));
    }

    #[test]
    fn titles_tolerate_case_bold_and_underscores() {
        let text = "**history summary:** walked\nSUBTASK REASONING: next\n## Subtask_Description:\ngrasp the cup\n";
        let r = parse_stage(Stage::SubtaskProposal, text).unwrap();
        assert_eq!(
            r,
            StageResult::SubtaskProposal { history_summary: "walked".into(), subtask_reasoning: "next".into(), subtask: "grasp the cup".into() }
        );
    }

    #[test]
    fn action_block_is_parsed() {
        let text = "Decision_Making_Reasoning:\n1. turn\nActions:\n```python\nturn_right(\"small\")\n```\nKey_reason_of_last_action:\nface the table\n";
        let StageResult::ActionPlanning { action, key_reason, .. } = parse_stage(Stage::ActionPlanning, text).unwrap() else { panic!() };
        let call = action.unwrap();
        assert_eq!(call.name, "turn_right");
        assert_eq!(call.args[0].value, Literal::Str("small".into()));
        assert_eq!(key_reason, "face the table");
    }

    #[test]
    fn empty_block_means_no_action() {
        let text = "Action:\n```python\n```\n";
        assert!(matches!(parse_stage(Stage::ActionPlanning, text).unwrap(), StageResult::ActionPlanning { action: None, .. }));
    }

    #[test]
    fn code_block_problems() {
        let open = "Decision_Making_Reasoning:\nx\nActions:\n```python\ngo_straight(\"small\")\nKey_reason_of_last_action:\ny\n";
        assert!(matches!(parse_stage(Stage::ActionPlanning, open), Err(ParseError::MalformedCodeBlock(_))));
        let bare = "Decision_Making_Reasoning:\nx\nActions:\ngo_straight(\"small\")\nKey_reason_of_last_action:\ny\n";
        assert!(matches!(parse_stage(Stage::ActionPlanning, bare), Err(ParseError::MalformedCodeBlock(_))));
        let two = "Action:\n```\ngo(); stop()\n```\n";
        assert_eq!(parse_stage(Stage::ActionPlanning, two), Err(ParseError::Call(CallError::MultipleCalls)));
    }

    #[test]
    fn headings_inside_code_are_content() {
        let text = "Action:\n```python\nspeak(text=\"Action: x\")\n```\n";
        let StageResult::ActionPlanning { action, .. } = parse_stage(Stage::ActionPlanning, text).unwrap() else { panic!() };
        assert_eq!(action.unwrap().args[0].value, Literal::Str("Action: x".into()));
    }

    #[test]
    fn empty_response_rejected() {
        assert_eq!(parse_stage(Stage::Reflection, " \n"), Err(ParseError::Empty));
    }
}
