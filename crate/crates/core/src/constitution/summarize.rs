use super::{error_text, Category, Constitution, Origin, Rule, Source};
use crate::reflect::parse::{parse_list_output, parse_record_output, ParseDiagnostic};

/// Rule text, the (mistake, solution) pair for Error rules, and priority.
type NewRule = (String, Option<(String, String)>, Option<u32>);

/// Per-call outcome of [`Constitution::summarize`].
#[derive(Debug, Clone, Default, PartialEq)]
pub struct SummaryOutcome {
    /// Categories whose rules were replaced, with old and new counts.
    pub replaced: Vec<(Category, usize, usize)>,
    /// Categories left untouched because the output could not be used.
    pub failures: Vec<(Category, ParseDiagnostic)>,
}

/// Summarization request for one long-term category.
pub fn summarization_prompt(category: Category, current_list: &str) -> String {
    let purpose = match category {
        Category::Error => "The resulting summary should be usable by any other agent to avoid making any mistakes that were made.",
        _ => "The resulting summary should be usable by any other agent to quickly solve tasks by using the knowledge built using your experience.",
    };
    let format_line = match category {
        Category::Error => "The summarized constitution should be in a python list format (enclosed in []), as a list of dictionaries with the keys 'mistake' and 'solution'.",
        _ => "The summarized constitution should be in a python list format (enclosed in []).",
    };
    format!(
        "Inspect and summarize the constitution you have build over time by exploring the environment and solving numerous tasks.\n\
         {purpose}\n\
         There should not be duplicates in the constitution. You should be clear and concise while summarizing.\n\
         You can create new rules by summarizing multiple rules together without losing information.\n\
         Here is the current constitution: {current_list}\n\
         {format_line}"
    )
}

/// Most frequent source among `rules`, ties going to the earliest seen.
fn dominant_source<'a>(rules: impl Iterator<Item = &'a Rule>) -> Option<Source> {
    let mut tally: Vec<(Source, usize)> = Vec::new();
    for r in rules {
        match tally.iter_mut().find(|(s, _)| *s == r.source) {
            Some((_, n)) => *n += 1,
            None => tally.push((r.source, 1)),
        }
    }
    let best = tally.iter().map(|(_, n)| *n).max()?;
    tally.into_iter().find(|(_, n)| *n == best).map(|(s, _)| s)
}

impl Constitution {
    /// Serialized rule list for a category, as it appears in the
    /// summarization prompt.
    pub fn category_literal(&self, category: Category) -> String {
        match category {
            Category::Error => {
                let items: Vec<serde_json::Value> = self
                    .rules_in(category)
                    .map(|r| {
                        serde_json::json!({
                            "mistake": r.mistake.clone().unwrap_or_default(),
                            "solution": r.solution.clone().unwrap_or_default(),
                        })
                    })
                    .collect();
                serde_json::to_string(&items).expect("json")
            }
            _ => {
                let items: Vec<&str> = self.rules_in(category).map(|r| r.text.as_str()).collect();
                serde_json::to_string(&items).expect("json")
            }
        }
    }

    /// Rewrites each selected long-term category with the summarizer's list.
    ///
    /// Progress is never summarized and is ignored if passed. A category
    /// whose output cannot be parsed, or that would be emptied, keeps its
    /// current rules and is reported in [`SummaryOutcome::failures`].
    /// Transport errors from the summarizer propagate; categories already
    /// rewritten stay rewritten.
    pub fn summarize<F, E>(
        &mut self,
        categories: &[Category],
        origin: Origin,
        mut summarizer: F,
    ) -> Result<SummaryOutcome, E>
    where
        F: FnMut(Category, &str) -> Result<String, E>,
    {
        let mut outcome = SummaryOutcome::default();
        for category in Category::LONG_TERM {
            if !categories.contains(&category) {
                continue;
            }
            let prompt = summarization_prompt(category, &self.category_literal(category));
            let output = summarizer(category, &prompt)?;
            let before = self.rules_in(category).count();
            let source = dominant_source(self.rules_in(category)).unwrap_or(Source::Neural);

            let new_rules: Vec<NewRule> = match category {
                Category::Error => {
                    let parsed = parse_record_output(&output);
                    if parsed.failed() {
                        outcome
                            .failures
                            .push((category, parsed.diagnostic.expect("failed has diagnostic")));
                        continue;
                    }
                    parsed
                        .items
                        .into_iter()
                        .map(|r| {
                            (
                                error_text(&r.mistake, &r.solution),
                                Some((r.mistake.trim().to_string(), r.solution.trim().to_string())),
                                r.priority,
                            )
                        })
                        .collect()
                }
                _ => {
                    let parsed = parse_list_output(&output);
                    if parsed.failed() {
                        outcome
                            .failures
                            .push((category, parsed.diagnostic.expect("failed has diagnostic")));
                        continue;
                    }
                    parsed
                        .items
                        .into_iter()
                        .map(|t| (t.trim().to_string(), None, None))
                        .collect()
                }
            };
            if new_rules.is_empty() && before > 0 {
                outcome.failures.push((category, ParseDiagnostic::EmptyResult));
                continue;
            }

            self.rules.retain(|r| r.category != category);
            let mut after = 0;
            for (text, record, priority) in new_rules {
                if text.is_empty() || self.contains(category, &text) {
                    continue;
                }
                let mut rule = self.make_rule(category, text, source, origin);
                if let Some((m, s)) = record {
                    rule.mistake = Some(m);
                    rule.solution = Some(s);
                }
                rule.priority = priority;
                self.rules.push(rule);
                after += 1;
            }
            outcome.replaced.push((category, before, after));
        }
        self.summarization_count += 1;
        self.version += 1;
        Ok(outcome)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::reflect::parse::extract_list_literal;
    use crate::reflect::{ErrorRecord, ReflectionBatch};
    use std::convert::Infallible;

    fn seeded() -> Constitution {
        let mut c = Constitution::new("e");
        let b = ReflectionBatch {
            abstracts: vec!["open fridge before use".into(), "fridge must be opened first".into()],
            errors: vec![ErrorRecord::new("Cabinet was not opened", "Open the cabinet next time")],
            progress: vec!["You have located an apple".into()],
        };
        c.add_rules(&b, Origin::new(0, 10), Source::Neural);
        c
    }

    /// Returns the list literal embedded in the prompt unchanged.
    fn identity(_: Category, prompt: &str) -> Result<String, Infallible> {
        Ok(extract_list_literal(prompt).unwrap().to_string())
    }

    #[test]
    fn identity_summarizer_keeps_rules_and_bumps_counters() {
        let mut c = seeded();
        let texts: Vec<String> = c.rules().iter().map(|r| r.text.clone()).collect();
        let (v, n) = (c.version(), c.summarization_count());
        let out = c.summarize(&Category::LONG_TERM, Origin::new(1, 0), identity).unwrap();
        assert!(out.failures.is_empty());
        let mut after: Vec<String> = c.rules().iter().map(|r| r.text.clone()).collect();
        let mut before = texts;
        before.sort();
        after.sort();
        assert_eq!(before, after);
        assert_eq!(c.version(), v + 1);
        assert_eq!(c.summarization_count(), n + 1);
        let err = c.rules_in(Category::Error).next().unwrap();
        assert_eq!(err.mistake.as_deref(), Some("Cabinet was not opened"));
    }

    #[test]
    fn collapsing_summarizer_replaces_category() {
        let mut c = seeded();
        let out = c
            .summarize(&[Category::Abstract], Origin::new(1, 0), |_, _| {
                Ok::<_, Infallible>(r#"["Open the fridge before using it"]"#.to_string())
            })
            .unwrap();
        assert_eq!(out.replaced, vec![(Category::Abstract, 2, 1)]);
        let texts: Vec<&str> = c.rules_in(Category::Abstract).map(|r| r.text.as_str()).collect();
        assert_eq!(texts, ["Open the fridge before using it"]);
        assert_eq!(c.counts().error, 1);
        assert_eq!(c.counts().progress, 1);
        // fresh ids keep increasing
        let ids: Vec<u64> = c.rules().iter().map(|r| r.id).collect();
        assert!(ids.windows(2).all(|w| w[0] < w[1]));
    }

    #[test]
    fn prose_output_leaves_rules_and_flags_failure() {
        let mut c = seeded();
        let before = c.rules().to_vec();
        let out = c
            .summarize(&Category::LONG_TERM, Origin::new(1, 0), |_, _| {
                Ok::<_, Infallible>("The constitution looks good to me.".to_string())
            })
            .unwrap();
        assert_eq!(out.failures.len(), 2);
        assert_eq!(c.rules(), &before[..]);
        assert_eq!(c.summarization_count(), 1);
    }

    #[test]
    fn progress_is_never_summarized() {
        let mut c = seeded();
        let mut asked = Vec::new();
        c.summarize(&Category::ALL, Origin::default(), |cat, p| {
            asked.push(cat);
            identity(cat, p)
        })
        .unwrap();
        assert_eq!(asked, Category::LONG_TERM);
        assert_eq!(c.counts().progress, 1);
    }

    #[test]
    fn empty_categories_are_still_sent() {
        let mut c = Constitution::new("e");
        let mut calls = 0;
        let out = c
            .summarize(&Category::LONG_TERM, Origin::default(), |_, _| {
                calls += 1;
                Ok::<_, Infallible>("[]".to_string())
            })
            .unwrap();
        assert_eq!(calls, 2);
        assert!(out.failures.is_empty());
    }

    #[test]
    fn prompt_carries_template_and_list() {
        let c = seeded();
        let p = summarization_prompt(Category::Abstract, &c.category_literal(Category::Abstract));
        assert!(p.starts_with("Inspect and summarize the constitution"));
        assert!(
            p.contains(r#"Here is the current constitution: ["open fridge before use","fridge must be opened first"]"#)
        );
        assert!(p.contains("There should not be duplicates"));
    }

    #[test]
    fn dominant_source_prefers_majority() {
        let mut c = Constitution::new("e");
        c.add_rules(
            &ReflectionBatch {
                abstracts: vec!["a".into()],
                ..Default::default()
            },
            Origin::default(),
            Source::Symbolic,
        );
        c.add_rules(
            &ReflectionBatch {
                abstracts: vec!["b".into(), "c".into()],
                ..Default::default()
            },
            Origin::default(),
            Source::Neural,
        );
        c.summarize(&[Category::Abstract], Origin::default(), identity).unwrap();
        assert!(c.rules().iter().all(|r| r.source == Source::Neural));
    }
}
