//! Prompt templates for the three judge operations.
//!
//! The canonical templates ship inside the binary; a directory override
//! exists so operators can pin alternates. Each template is validated to
//! contain every placeholder its operation substitutes — a template that
//! silently drops an input would corrupt every judgment downstream.

use std::fs;
use std::path::Path;

use super::GatewayError;

/// Built-in templates, byte-for-byte the canonical versions.
const EXTRACTION: &str = include_str!("../../prompts/extraction.txt");
const VERIFICATION: &str = include_str!("../../prompts/verification.txt");
const UTILITY: &str = include_str!("../../prompts/utility.txt");

/// The loaded template set.
#[derive(Debug, Clone)]
pub struct PromptSet {
    pub extraction: String,
    pub verification: String,
    pub utility: String,
}

impl PromptSet {
    /// The embedded canonical templates.
    pub fn builtin() -> Result<PromptSet, GatewayError> {
        let set = PromptSet {
            extraction: EXTRACTION.to_string(),
            verification: VERIFICATION.to_string(),
            utility: UTILITY.to_string(),
        };
        set.validate()?;
        Ok(set)
    }

    /// Loads `extraction.txt`, `verification.txt`, `utility.txt` from a dir.
    pub fn from_dir(dir: &Path) -> Result<PromptSet, GatewayError> {
        let read = |name: &str| {
            fs::read_to_string(dir.join(name))
                .map_err(|e| GatewayError::Prompt(format!("cannot read {name}: {e}")))
        };
        let set = PromptSet {
            extraction: read("extraction.txt")?,
            verification: read("verification.txt")?,
            utility: read("utility.txt")?,
        };
        set.validate()?;
        Ok(set)
    }

    fn validate(&self) -> Result<(), GatewayError> {
        let demand = |template: &str, name: &str, placeholder: &str| {
            if template.contains(placeholder) {
                Ok(())
            } else {
                Err(GatewayError::Prompt(format!("{name} template is missing {placeholder}")))
            }
        };
        demand(&self.extraction, "extraction", "{query}")?;
        demand(&self.verification, "verification", "{person_data}")?;
        demand(&self.verification, "verification", "{criterion_description}")?;
        demand(&self.utility, "utility", "{person_data}")?;
        demand(&self.utility, "utility", "{query}")?;
        Ok(())
    }

    pub fn render_extraction(&self, query_text: &str) -> String {
        self.extraction.replace("{query}", query_text)
    }

    pub fn render_verification(&self, person_data: &str, criterion_description: &str) -> String {
        self.verification
            .replace("{person_data}", person_data)
            .replace("{criterion_description}", criterion_description)
    }

    pub fn render_utility(&self, person_data: &str, query_text: &str) -> String {
        self.utility.replace("{person_data}", person_data).replace("{query}", query_text)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn builtin_templates_carry_their_placeholders() {
        let set = PromptSet::builtin().unwrap();
        assert!(set.extraction.contains("{query}"));
        assert!(set.verification.contains("{person_data}"));
        assert!(set.utility.contains("{query}"));
    }

    #[test]
    fn rendering_substitutes_without_touching_literal_braces() {
        let set = PromptSet::builtin().unwrap();
        let rendered = set.render_extraction("Find senior ML engineers at Google in Bay Area");
        assert!(rendered.contains("Query: Find senior ML engineers at Google in Bay Area"));
        assert!(!rendered.contains("{query}"));
        // The JSON example block in the template must survive verbatim.
        assert!(rendered.contains("\"criteria\": ["));

        let verification = set.render_verification("{\"name\": \"X\"}", "Currently employed at Google");
        assert!(verification.contains("Criterion: Currently employed at Google"));
        assert!(verification.contains("Person: {\"name\": \"X\"}"));
    }

    #[test]
    fn missing_placeholder_fails_validation() {
        let dir = tempfile::tempdir().unwrap();
        fs::write(dir.path().join("extraction.txt"), "no placeholder here").unwrap();
        fs::write(dir.path().join("verification.txt"), "{person_data} {criterion_description}").unwrap();
        fs::write(dir.path().join("utility.txt"), "{person_data} {query}").unwrap();
        let err = PromptSet::from_dir(dir.path()).unwrap_err();
        assert!(err.to_string().contains("{query}"));
    }
}
