//! Reviewer prompt templates.
//!
//! A prompt is a task header followed by labeled sections, separated by blank
//! lines, ending with an answer cue. The summarization wording is the
//! reference template set; question answering and generic tasks swap the nouns.

use alloc::string::String;
use alloc::vec::Vec;

use crate::corpus::{ModelOutput, Task, TaskKind};
use crate::error::{Error, Result};
use crate::types::PromptSetting;

/// Generation prompt for summarization evaluatees.
pub const SUMMARY_INSTRUCTION: &str =
    "Task: Generate a short summary of the text in at most 64 words. Text: {source} Summary:";

/// Order of the source and output sections in a pointwise prompt.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq)]
pub enum SectionOrder {
    #[default]
    SourceFirst,
    OutputFirst,
}

struct Wording {
    pairwise_task: &'static str,
    point5_task: &'static str,
    point100_task: &'static str,
    source_label: &'static str,
    output_label: &'static str,
    output_one_label: &'static str,
    output_two_label: &'static str,
    score_cue: &'static str,
}

const SUMMARIZATION: Wording = Wording {
    pairwise_task: "###Task: Evaluate two summaries of a given passage and determine which one better summarizes the main points of the passage considering accuracy and conciseness. You only need to output `one` or `two` directly to indicate which summary summarizes the passage better.",
    point5_task: "###Task: Evaluate the summary of a given passage and determine how it summarizes the main points of the passage considering accuracy and conciseness. Directly output a number between 1 and 5 to indicate the quality score of this summary:\n\
- 1 means the summary is not relevant to the passage,\n\
- 2 means the summary is neither accurate nor concise but it is relevant to the passage,\n\
- 3 means the summary is only a fair summary of the passage considering accuracy and conciseness,\n\
- 4 means the summary is a good summary of the passage but still has room for improvement in accuracy and conciseness,\n\
- 5 means the summary is a perfect summary of the passage considering accuracy and conciseness.",
    point100_task: "###Task: Evaluate the summary of a given passage and determine how it summarizes the main points of the passage considering accuracy and conciseness. Directly output a number between 0 and 100 to indicate the score of this summary. The higher the score, the more accurate and concise the summary is.",
    source_label: "###Passage: ",
    output_label: "###Summary: ",
    output_one_label: "###Summary one: ",
    output_two_label: "###Summary two: ",
    score_cue: "###Score of the summary:",
};

const QUESTION_ANSWERING: Wording = Wording {
    pairwise_task: "###Task: Evaluate two answers to a given question and determine which one better answers the question considering accuracy and conciseness. You only need to output `one` or `two` directly to indicate which answer answers the question better.",
    point5_task: "###Task: Evaluate the answer to a given question and determine how well it answers the question considering accuracy and conciseness. Directly output a number between 1 and 5 to indicate the quality score of this answer:\n\
- 1 means the answer is not relevant to the question,\n\
- 2 means the answer is neither accurate nor concise but it is relevant to the question,\n\
- 3 means the answer is only a fair answer to the question considering accuracy and conciseness,\n\
- 4 means the answer is a good answer to the question but still has room for improvement in accuracy and conciseness,\n\
- 5 means the answer is a perfect answer to the question considering accuracy and conciseness.",
    point100_task: "###Task: Evaluate the answer to a given question and determine how well it answers the question considering accuracy and conciseness. Directly output a number between 0 and 100 to indicate the score of this answer. The higher the score, the more accurate and concise the answer is.",
    source_label: "###Question: ",
    output_label: "###Answer: ",
    output_one_label: "###Answer one: ",
    output_two_label: "###Answer two: ",
    score_cue: "###Score of the answer:",
};

const GENERIC: Wording = Wording {
    pairwise_task: "###Task: Evaluate two responses to a given input and determine which one better fulfils the input considering accuracy and conciseness. You only need to output `one` or `two` directly to indicate which response is better.",
    point5_task: "###Task: Evaluate the response to a given input and determine how well it fulfils the input considering accuracy and conciseness. Directly output a number between 1 and 5 to indicate the quality score of this response:\n\
- 1 means the response is not relevant to the input,\n\
- 2 means the response is neither accurate nor concise but it is relevant to the input,\n\
- 3 means the response is only a fair response to the input considering accuracy and conciseness,\n\
- 4 means the response is a good response to the input but still has room for improvement in accuracy and conciseness,\n\
- 5 means the response is a perfect response to the input considering accuracy and conciseness.",
    point100_task: "###Task: Evaluate the response to a given input and determine how well it fulfils the input considering accuracy and conciseness. Directly output a number between 0 and 100 to indicate the score of this response. The higher the score, the more accurate and concise the response is.",
    source_label: "###Input: ",
    output_label: "###Response: ",
    output_one_label: "###Response one: ",
    output_two_label: "###Response two: ",
    score_cue: "###Score of the response:",
};

const PAIRWISE_CUE: &str = "###Output:";

fn wording(kind: TaskKind) -> &'static Wording {
    match kind {
        TaskKind::Summarization => &SUMMARIZATION,
        TaskKind::Qa => &QUESTION_ANSWERING,
        TaskKind::Generic => &GENERIC,
    }
}

/// Renders the reviewer prompt for a setting.
///
/// Pairwise prompts take exactly two outputs, pointwise prompts exactly one.
pub fn render_prompt(setting: PromptSetting, task: &Task, outputs: &[&ModelOutput]) -> Result<String> {
    render_prompt_ordered(setting, task, outputs, SectionOrder::SourceFirst)
}

/// Like [`render_prompt`], but lets pointwise prompts show the output before
/// the source. Pairwise prompts ignore `order`; swap the outputs instead.
pub fn render_prompt_ordered(
    setting: PromptSetting,
    task: &Task,
    outputs: &[&ModelOutput],
    order: SectionOrder,
) -> Result<String> {
    if outputs.len() != setting.arity() {
        return Err(Error::Arity {
            setting: setting.as_str(),
            expected: setting.arity(),
            got: outputs.len(),
        });
    }
    let w = wording(task.task_kind);
    let source = (w.source_label, task.source.as_str());
    let (header, sections, cue): (&str, Vec<(&str, &str)>, &str) = match setting {
        PromptSetting::Pairwise => (
            w.pairwise_task,
            alloc::vec![
                source,
                (w.output_one_label, outputs[0].text.as_str()),
                (w.output_two_label, outputs[1].text.as_str()),
            ],
            PAIRWISE_CUE,
        ),
        PromptSetting::Point5 | PromptSetting::Point100 => {
            let header = if setting == PromptSetting::Point5 {
                w.point5_task
            } else {
                w.point100_task
            };
            let output = (w.output_label, outputs[0].text.as_str());
            let sections = match order {
                SectionOrder::SourceFirst => alloc::vec![source, output],
                SectionOrder::OutputFirst => alloc::vec![output, source],
            };
            (header, sections, w.score_cue)
        }
    };

    let mut prompt = String::with_capacity(
        header.len() + cue.len() + sections.iter().map(|(l, t)| l.len() + t.len() + 2).sum::<usize>() + 2,
    );
    prompt.push_str(header);
    for (label, text) in sections {
        prompt.push_str("\n\n");
        prompt.push_str(label);
        prompt.push_str(text);
    }
    prompt.push_str("\n\n");
    prompt.push_str(cue);
    Ok(prompt)
}

/// Generation prompt for an evaluatee: the task instruction with `{source}`
/// replaced by the source text, or the source appended after a blank line
/// when the instruction has no placeholder.
pub fn render_generation_prompt(task: &Task) -> String {
    if task.instruction.contains("{source}") {
        // Single replacement so a source containing `{source}` stays literal.
        let (head, tail) = task.instruction.split_once("{source}").unwrap();
        let mut out = String::with_capacity(task.instruction.len() + task.source.len());
        out.push_str(head);
        out.push_str(&task.source);
        out.push_str(tail);
        out
    } else {
        let mut out = task.instruction.clone();
        out.push_str("\n\n");
        out.push_str(&task.source);
        out
    }
}
