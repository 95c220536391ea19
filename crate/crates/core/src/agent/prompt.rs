use std::collections::BTreeMap;

use super::{AgentError, AgentMemory};
use crate::trace::Stage;

pub const INFO_GATHERING: &str = include_str!("../../prompts/info_gathering.txt");
pub const REFLECTION: &str = include_str!("../../prompts/reflection.txt");
pub const SUBTASK_PROPOSAL: &str = include_str!("../../prompts/subtask_proposal.txt");
pub const ACTION_PLANNING: &str = include_str!("../../prompts/action_planning.txt");
pub const ACTION_PLANNING_SHORT: &str = include_str!("../../prompts/action_planning_short.txt");

/// Slots that may legitimately render empty.
const OPTIONAL: [&str; 1] = ["few_shots"];

const NONE: &str = "None";

/// Everything a template can ask for at one stage.
#[derive(Debug, Clone)]
pub struct PromptContext<'a> {
    pub stage: Stage,
    pub task_description: String,
    pub memory: &'a AgentMemory,
    pub semantic_map: String,
    /// Textual stand-in for the camera frame.
    pub detections_summary: String,
    pub skill_library_render: String,
    pub image_same_flag: bool,
    pub few_shots: String,
    /// Use the compact action template.
    pub short_action: bool,
}

pub fn template(stage: Stage, short_action: bool) -> &'static str {
    match stage {
        Stage::InfoGathering => INFO_GATHERING,
        Stage::Reflection => REFLECTION,
        Stage::SubtaskProposal => SUBTASK_PROPOSAL,
        Stage::ActionPlanning if short_action => ACTION_PLANNING_SHORT,
        Stage::ActionPlanning => ACTION_PLANNING,
    }
}

/// Placeholder names in order of first appearance.
pub fn placeholders(template: &str) -> Vec<&str> {
    let mut out = Vec::new();
    let mut rest = template;
    while let Some(i) = rest.find("<$") {
        let Some(j) = rest[i + 2..].find("$>") else { break };
        let name = &rest[i + 2..i + 2 + j];
        if !out.contains(&name) {
            out.push(name);
        }
        rest = &rest[i + 2 + j + 2..];
    }
    out
}

fn or_none(s: &str) -> String {
    if s.trim().is_empty() {
        NONE.to_string()
    } else {
        s.to_string()
    }
}

fn slots(ctx: &PromptContext<'_>) -> BTreeMap<&'static str, String> {
    let m = ctx.memory;
    let last_action = m.last_action.as_ref().map_or(NONE.to_string(), |c| c.to_string());
    let image_introduction = if ctx.detections_summary.trim().is_empty() {
        String::new()
    } else {
        format!("Current camera view, one detection per line (label, bearing in rad, depth in m):\n{}", ctx.detections_summary)
    };
    BTreeMap::from([
        ("task_description", ctx.task_description.clone()),
        ("semantic_map", ctx.semantic_map.clone()),
        ("image_introduction", image_introduction),
        ("skill_library", ctx.skill_library_render.clone()),
        ("image_same_flag", if ctx.image_same_flag { "True" } else { "False" }.to_string()),
        ("few_shots", ctx.few_shots.clone()),
        ("image_description", or_none(&m.image_description)),
        ("subtask_description", or_none(&m.subtask)),
        ("subtask_reasoning", or_none(&m.subtask_reasoning)),
        ("robot_location", or_none(&m.area_location)),
        ("robot_holding_cup_status", or_none(&m.holding_status)),
        ("previous_action", last_action.clone()),
        ("previous_action_call", last_action),
        ("executing_action_error", or_none(m.last_error.as_deref().unwrap_or(""))),
        ("previous_reasoning", or_none(&m.key_reason)),
        ("key_reason_of_last_action", or_none(&m.key_reason)),
        ("self_reflection_reasoning", or_none(&m.last_reflection)),
        ("previous_self_reflection_reasoning", or_none(&m.last_reflection)),
        ("success_detection", or_none(&m.success_detection)),
        ("previous_summarization", or_none(&m.history_summary)),
    ])
}

/// Fills every `<$name$>` slot of the stage template.
pub fn render_prompt(ctx: &PromptContext<'_>) -> Result<String, AgentError> {
    let tpl = template(ctx.stage, ctx.short_action);
    let values = slots(ctx);
    let mut out = tpl.to_string();
    for name in placeholders(tpl) {
        let value = values.get(name).ok_or_else(|| AgentError::MissingPlaceholder(name.to_string()))?;
        if value.trim().is_empty() && !OPTIONAL.contains(&name) {
            return Err(AgentError::MissingPlaceholder(name.to_string()));
        }
        out = out.replace(&format!("<${name}$>"), value);
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn ctx(memory: &AgentMemory, stage: Stage) -> PromptContext<'_> {
        PromptContext {
            stage,
            task_description: "Make a cup of coffee.".into(),
            memory,
            semantic_map: "office_area: wooden_table, coffee_machine".into(),
            detections_summary: "wooden_table 0.10 3.20".into(),
            skill_library_render: "grasp_cup()".into(),
            image_same_flag: false,
            few_shots: String::new(),
            short_action: false,
        }
    }

    #[test]
    fn every_template_renders_completely() {
        let m = AgentMemory::default();
        for stage in Stage::ORDER {
            for short in [false, true] {
                let mut c = ctx(&m, stage);
                c.short_action = short;
                let out = render_prompt(&c).unwrap();
                assert!(!out.contains("<$"), "{stage:?}");
                assert!(out.contains("Make a cup of coffee."));
            }
        }
    }

    #[test]
    fn info_prompt_keeps_target_heading() {
        let m = AgentMemory::default();
        let out = render_prompt(&ctx(&m, Stage::InfoGathering)).unwrap();
        assert!(out.contains("Target Name:"));
        assert!(out.contains("Area Location:"));
    }

    #[test]
    fn empty_map_is_rejected() {
        let m = AgentMemory::default();
        let mut c = ctx(&m, Stage::InfoGathering);
        c.semantic_map = "  ".into();
        assert_eq!(render_prompt(&c), Err(AgentError::MissingPlaceholder("semantic_map".into())));
    }

    #[test]
    fn rendering_is_pure() {
        let m = AgentMemory::default();
        let c = ctx(&m, Stage::ActionPlanning);
        assert_eq!(render_prompt(&c).unwrap(), render_prompt(&c).unwrap());
    }

    #[test]
    fn placeholder_scan() {
        assert_eq!(placeholders("a <$x$> b <$y_z$> <$x$>"), vec!["x", "y_z"]);
        assert!(placeholders(ACTION_PLANNING).contains(&"few_shots"));
    }
}
