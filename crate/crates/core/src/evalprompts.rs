//! Per-benchmark response-format prompts used at evaluation time.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::prompts;

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct BenchmarkRule {
    pub name: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub prompt: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Registry {
    #[serde(rename = "benchmark")]
    rules: Vec<BenchmarkRule>,
}

impl Default for Registry {
    fn default() -> Self {
        Self::builtin()
    }
}

impl Registry {
    pub fn new(rules: Vec<BenchmarkRule>) -> Result<Self> {
        for (i, rule) in rules.iter().enumerate() {
            if rules[..i].iter().any(|r| r.name == rule.name) {
                return Err(Error::InvalidInput(format!("duplicate benchmark `{}`", rule.name)));
            }
        }
        Ok(Self { rules })
    }

    pub fn builtin() -> Self {
        let rule = |name: &str, prompt: Option<&str>| BenchmarkRule {
            name: name.to_string(),
            prompt: prompt.map(str::to_string),
        };
        let short = Some(prompts::SHORT_ANSWER);
        let letter = Some(prompts::OPTION_LETTER);
        Self {
            rules: vec![
                rule("LLaVA-Bench", None),
                rule("MM-Vet", None),
                rule("VQAv2", short),
                rule("GQA", short),
                rule("TextVQA", short),
                rule("MME", short),
                rule("POPE", short),
                rule("ScienceQA", letter),
                rule("MMBench", letter),
                rule("SEED-Bench", letter),
                rule("VizWiz", Some(prompts::UNANSWERABLE_SHORT)),
            ],
        }
    }

    pub fn rules(&self) -> &[BenchmarkRule] {
        &self.rules
    }

    pub fn eval_prompt(&self, benchmark: &str) -> Result<Option<&str>> {
        self.rules
            .iter()
            .find(|r| r.name == benchmark)
            .map(|r| r.prompt.as_deref())
            .ok_or_else(|| Error::UnknownBenchmark(benchmark.to_string()))
    }

    pub fn apply_eval_prompt(&self, question: &str, benchmark: &str) -> Result<String> {
        Ok(match self.eval_prompt(benchmark)? {
            Some(prompt) => prompts::append(question, prompt),
            None => question.to_string(),
        })
    }

    pub fn to_toml(&self) -> String {
        toml::to_string(self).expect("registry always serializes")
    }

    pub fn from_toml(text: &str) -> Result<Self> {
        let parsed: Registry = toml::from_str(text)
            .map_err(|e| Error::InvalidInput(format!("registry: {}", e.message())))?;
        Self::new(parsed.rules)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn table_lookups() {
        let reg = Registry::builtin();
        assert_eq!(
            reg.eval_prompt("VizWiz").unwrap(),
            Some("When the provided information is insufficient, respond with `Unanswerable'. Answer the question using a single word or phrase.")
        );
        assert_eq!(reg.eval_prompt("MM-Vet").unwrap(), None);
        assert_eq!(
            reg.eval_prompt("MMBench").unwrap(),
            Some("Answer with the option's letter from the given choices directly.")
        );
        assert!(matches!(reg.eval_prompt("CoCo"), Err(Error::UnknownBenchmark(_))));
    }

    #[test]
    fn apply() {
        let reg = Registry::builtin();
        assert_eq!(
            reg.apply_eval_prompt("Is there a dog?", "POPE").unwrap(),
            "Is there a dog?\nAnswer the question using a single word or phrase."
        );
        assert_eq!(reg.apply_eval_prompt("q", "LLaVA-Bench").unwrap(), "q");
        assert_eq!(
            reg.apply_eval_prompt("", "GQA").unwrap(),
            format!("\n{}", prompts::SHORT_ANSWER)
        );
    }

    #[test]
    fn toml_round_trip_is_byte_exact() {
        let reg = Registry::builtin();
        let text = reg.to_toml();
        let back = Registry::from_toml(&text).unwrap();
        assert_eq!(back, reg);
        for rule in reg.rules() {
            assert_eq!(back.eval_prompt(&rule.name).unwrap(), rule.prompt.as_deref());
        }
        assert_eq!(back.to_toml(), text);
    }

    #[test]
    fn duplicate_names_rejected() {
        let text = "[[benchmark]]\nname = \"A\"\n[[benchmark]]\nname = \"A\"\n";
        assert!(Registry::from_toml(text).is_err());
    }
}
