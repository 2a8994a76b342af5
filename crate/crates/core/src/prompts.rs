//! Response-format prompts appended to questions.

pub const SHORT_ANSWER: &str = "Answer the question using a single word or phrase.";
pub const OPTION_LETTER: &str = "Answer with the option's letter from the given choices directly.";
pub const CAPTION: &str = "Provide a one-sentence caption for the provided image.";
pub const REGION_DESCRIBE: &str = "Provide a short description for this region.";
pub const REGION_LOCATE: &str =
    "Provide the bounding box coordinate of the region this sentence describes.";
pub const UNANSWERABLE_SHORT: &str = "When the provided information is insufficient, respond with `Unanswerable'. Answer the question using a single word or phrase.";

/// Joins a question and a format prompt with a single newline.
pub fn append(question: &str, prompt: &str) -> String {
    let mut out = String::with_capacity(question.len() + 1 + prompt.len());
    out.push_str(question);
    out.push('\n');
    out.push_str(prompt);
    out
}
