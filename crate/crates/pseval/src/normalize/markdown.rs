//! Heuristic extraction of person records from free-text markdown reports.
//!
//! Agent-style platforms answer with prose instead of structured payloads.
//! This parser recognizes the shapes those reports actually use — headed
//! person blocks, bold-lead bullets, numbered lists — and pulls out the
//! fields it can prove: names, "Title at Company" lines, labeled fields,
//! profile links, and emails. Whatever text remains in a block becomes the
//! bio. The grammar is frozen by the fixture corpus under
//! `tests/fixtures/markdown/`; change it only with a schema-version bump.

use std::sync::LazyLock;

use regex::Regex;

use crate::model::PersonRecord;
use crate::normalize::content_hash_id;

static HEADING: LazyLock<Regex> = LazyLock::new(|| Regex::new(r"^\s{0,3}#{1,6}\s+(.+?)\s*$").unwrap());
static BULLET_BOLD: LazyLock<Regex> =
    LazyLock::new(|| Regex::new(r"^\s*(?:[-*+]|\d+[.)])\s+\*\*(.+?)\*\*[\s:,—–-]*(.*)$").unwrap());
static BARE_BOLD: LazyLock<Regex> =
    LazyLock::new(|| Regex::new(r"^\s*\*\*(.+?)\*\*[\s:,—–-]*(.*)$").unwrap());
static NUMBERED: LazyLock<Regex> = LazyLock::new(|| Regex::new(r"^\s*\d+[.)]\s+(.+?)\s*$").unwrap());
static ENUM_PREFIX: LazyLock<Regex> = LazyLock::new(|| Regex::new(r"^\d+[.)]\s*").unwrap());
static MD_LINK: LazyLock<Regex> = LazyLock::new(|| Regex::new(r"\[([^\]]*)\]\(([^)\s]+)\)").unwrap());
static BARE_URL: LazyLock<Regex> = LazyLock::new(|| Regex::new(r#"https?://[^\s)\]>,"']+"#).unwrap());
static EMAIL: LazyLock<Regex> =
    LazyLock::new(|| Regex::new(r"[A-Za-z0-9._%+-]+@[A-Za-z0-9.-]+\.[A-Za-z]{2,}").unwrap());
static LABELED: LazyLock<Regex> = LazyLock::new(|| {
    Regex::new(r"^\s*[-*+]?\s*(?:\*\*)?([A-Za-z][A-Za-z /()-]{0,30}?)(?:\*\*)?\s*[:：]\s*(.+?)\s*$").unwrap()
});
static TITLE_AT: LazyLock<Regex> =
    LazyLock::new(|| Regex::new(r"(?i)^(.{2,90}?)\s+at\s+(.{2,90}?)[.\s]*$").unwrap());

/// Section headings that are never person names.
const SECTION_STOPLIST: [&str; 16] = [
    "results",
    "summary",
    "candidates",
    "overview",
    "introduction",
    "conclusion",
    "sources",
    "references",
    "notes",
    "methodology",
    "top candidates",
    "search results",
    "key findings",
    "recommendations",
    "candidate list",
    "profiles",
];

/// Words that mark a heading as a section title rather than a person.
const SECTION_WORDS: [&str; 10] = [
    "report", "results", "candidates", "summary", "findings", "overview", "sources", "references",
    "conclusion", "list",
];

/// Lowercase particles allowed inside proper names.
const NAME_PARTICLES: [&str; 15] =
    ["van", "de", "den", "der", "da", "dos", "von", "bin", "al", "el", "ter", "ten", "la", "le", "di"];

#[derive(Debug, Clone, Copy, PartialEq)]
enum StartKind {
    /// `### ...` — explicit author structure, loose name check.
    Heading,
    /// Bold or numbered lead — needs the stricter proper-name shape.
    Lead,
}

/// Parses a free-text report into person records. Never fails: text with no
/// recognizable person blocks yields an empty list.
pub fn parse_markdown_report(text: &str) -> Vec<PersonRecord> {
    let lines: Vec<&str> = text.lines().collect();
    let mut starts: Vec<(usize, StartKind, String, String)> = Vec::new();

    for (index, line) in lines.iter().enumerate() {
        if let Some(c) = HEADING.captures(line) {
            let content = ENUM_PREFIX.replace(&c[1], "").to_string();
            let (name_part, rest) = split_name_rest(&content);
            if heading_is_person(&name_part) {
                starts.push((index, StartKind::Heading, name_part, rest));
            }
            continue;
        }
        let lead = BULLET_BOLD
            .captures(line)
            .or_else(|| BARE_BOLD.captures(line))
            .map(|c| (c[1].to_string(), c[2].to_string()))
            .or_else(|| {
                NUMBERED.captures(line).map(|c| {
                    let (name_part, rest) = split_name_rest(&c[1]);
                    (name_part, rest)
                })
            });
        if let Some((raw_name, rest)) = lead {
            let (name_part, extra) = split_name_rest(&raw_name);
            let rest = if extra.is_empty() { rest } else { format!("{extra} {rest}") };
            if is_proper_name(&strip_links(&name_part).0) {
                starts.push((index, StartKind::Lead, name_part, rest));
            }
        }
    }

    let mut records = Vec::new();
    for (slot, (line_index, _, name_part, rest)) in starts.iter().enumerate() {
        let block_end = starts.get(slot + 1).map_or(lines.len(), |next| next.0);
        let block = &lines[*line_index + 1..block_end];
        if let Some(record) = build_record(name_part, rest, block) {
            records.push(record);
        }
    }
    records
}

/// Splits "Jane Doe — Senior ML Engineer at Google" into name and remainder.
fn split_name_rest(content: &str) -> (String, String) {
    for separator in [" — ", " – ", " -- ", " - ", " | ", ": ", ", "] {
        if let Some(pos) = content.find(separator) {
            let (name, rest) = content.split_at(pos);
            return (name.trim().to_string(), rest[separator.len()..].trim().to_string());
        }
    }
    (content.trim().to_string(), String::new())
}

/// Removes markdown links from text, returning the cleaned text and the URLs.
fn strip_links(text: &str) -> (String, Vec<String>) {
    let mut urls = Vec::new();
    let cleaned = MD_LINK
        .replace_all(text, |c: &regex::Captures| {
            urls.push(c[2].to_string());
            c[1].to_string()
        })
        .to_string();
    (cleaned.replace("**", "").trim().to_string(), urls)
}

fn heading_is_person(name_part: &str) -> bool {
    let (cleaned, _) = strip_links(name_part);
    let lowered = cleaned.to_lowercase();
    if cleaned.is_empty() || cleaned.len() > 80 || !cleaned.chars().any(|c| c.is_alphabetic()) {
        return false;
    }
    if SECTION_STOPLIST.contains(&lowered.trim_end_matches(':').trim()) {
        return false;
    }
    let token_count = cleaned.split_whitespace().count();
    if token_count > 7 {
        return false;
    }
    !lowered.split_whitespace().any(|t| SECTION_WORDS.contains(&t.trim_matches(|c: char| !c.is_alphanumeric())))
}

/// Strict shape check for names found in list leads: a few capitalized
/// tokens (particles allowed), no digits.
fn is_proper_name(candidate: &str) -> bool {
    let tokens: Vec<&str> = candidate.split_whitespace().collect();
    if tokens.is_empty() || tokens.len() > 5 || candidate.len() > 60 {
        return false;
    }
    if SECTION_STOPLIST.contains(&candidate.to_lowercase().trim_end_matches(':').trim()) {
        return false;
    }
    tokens.iter().all(|token| {
        let bare = token.trim_matches(|c: char| !(c.is_alphanumeric() || c == '\'' || c == '’' || c == '-'));
        if bare.is_empty() || bare.chars().any(|c| c.is_ascii_digit()) {
            return false;
        }
        NAME_PARTICLES.contains(&bare) || bare.chars().next().is_some_and(|c| c.is_uppercase())
    })
}

/// Field targets reachable from labeled lines like `- **Location:** Berlin`.
fn label_target(label: &str) -> Option<&'static str> {
    let key = label.to_lowercase().trim().trim_end_matches(':').trim().to_string();
    let target = match key.as_str() {
        "title" | "role" | "position" | "current role" | "current title" | "job title" => "title",
        "company" | "employer" | "organization" | "current company" | "workplace" => "company",
        "location" | "based in" | "region" | "city" => "location",
        "linkedin" | "linkedin url" | "linkedin profile" => "linkedin_url",
        "twitter" | "x" | "twitter/x" | "x (twitter)" | "twitter url" => "twitter_url",
        "email" | "e-mail" | "contact" | "contact email" => "email",
        "bio" | "summary" | "about" | "background" => "bio",
        "experience" | "work experience" | "past roles" => "experience",
        "education" => "education",
        "skills" | "expertise" | "specialties" => "skills",
        "why" | "why match" | "why a match" | "match" | "match reason" | "reason" | "evidence" | "fit"
        | "relevance" | "match explanation" => "match_explanation",
        "source" | "sources" | "source urls" => "source_urls",
        _ => return None,
    };
    Some(target)
}

/// Routes a URL to its schema field.
fn classify_url(record: &mut PersonRecord, url: &str) {
    let lowered = url.to_lowercase();
    if let Some(address) = lowered.strip_prefix("mailto:") {
        record.email.get_or_insert_with(|| address.to_string());
    } else if lowered.contains("linkedin.com") {
        record.linkedin_url.get_or_insert_with(|| url.to_string());
    } else if lowered.contains("twitter.com") || lowered.contains("//x.com") || lowered.contains("www.x.com") {
        record.twitter_url.get_or_insert_with(|| url.to_string());
    } else {
        let sources = record.source_urls.get_or_insert_with(Vec::new);
        if !sources.contains(&url.to_string()) {
            sources.push(url.to_string());
        }
    }
}

fn set_field(record: &mut PersonRecord, target: &str, value: &str) {
    let (cleaned, urls) = strip_links(value);
    for url in &urls {
        classify_url(record, url);
    }
    let text = || Some(cleaned.clone()).filter(|s| !s.is_empty());
    match target {
        "title" => record.title = record.title.take().or_else(text),
        "company" => record.company = record.company.take().or_else(text),
        "location" => record.location = record.location.take().or_else(text),
        "linkedin_url" => {
            if record.linkedin_url.is_none() {
                record.linkedin_url = urls.first().cloned().or_else(|| {
                    BARE_URL.find(value).map(|m| m.as_str().to_string())
                });
            }
        }
        "twitter_url" => {
            if record.twitter_url.is_none() {
                record.twitter_url = urls.first().cloned().or_else(|| {
                    BARE_URL.find(value).map(|m| m.as_str().to_string())
                });
            }
        }
        "email" => {
            if record.email.is_none() {
                record.email = EMAIL.find(&cleaned).map(|m| m.as_str().to_string());
            }
        }
        "bio" => record.bio = record.bio.take().or_else(text),
        "experience" => record.experience = record.experience.take().or_else(|| Some(split_list(&cleaned, ';'))),
        "education" => record.education = record.education.take().or_else(|| Some(split_list(&cleaned, ';'))),
        "skills" => record.skills = record.skills.take().or_else(|| Some(split_list(&cleaned, ','))),
        "match_explanation" => record.match_explanation = record.match_explanation.take().or_else(text),
        "source_urls" => {
            for url in BARE_URL.find_iter(value) {
                classify_url(record, url.as_str());
            }
        }
        _ => {}
    }
}

fn split_list(value: &str, separator: char) -> Vec<String> {
    let items: Vec<String> =
        value.split(separator).map(|s| s.trim().to_string()).filter(|s| !s.is_empty()).collect();
    if items.is_empty() {
        vec![value.trim().to_string()]
    } else {
        items
    }
}

fn build_record(name_part: &str, rest: &str, block: &[&str]) -> Option<PersonRecord> {
    let (name, name_urls) = strip_links(name_part);
    let name = name.trim_matches(|c: char| c == '*' || c == '#' || c.is_whitespace()).to_string();
    if name.is_empty() || !name.chars().any(|c| c.is_alphabetic()) {
        return None;
    }

    let mut record = PersonRecord::minimal("", name);
    for url in &name_urls {
        classify_url(&mut record, url);
    }

    // The heading remainder is the best spot for "Title at Company".
    let mut residual: Vec<String> = Vec::new();
    if !rest.is_empty() {
        consume_line(&mut record, rest, &mut residual);
    }
    for line in block {
        let trimmed = line.trim();
        if trimmed.is_empty() {
            continue;
        }
        consume_line(&mut record, trimmed, &mut residual);
    }

    if record.bio.is_none() && !residual.is_empty() {
        record.bio = Some(residual.join(" "));
    }
    if record.person_id.is_empty() {
        record.person_id = record
            .linkedin_url
            .clone()
            .unwrap_or_else(|| content_hash_id(&record.name, record.company.as_deref()));
    }
    Some(record)
}

/// Applies one line to the record; unconsumed prose lands in `residual`.
fn consume_line(record: &mut PersonRecord, line: &str, residual: &mut Vec<String>) {
    if let Some(c) = LABELED.captures(line) {
        if let Some(target) = label_target(&c[1]) {
            set_field(record, target, &c[2]);
            return;
        }
    }

    let (cleaned, urls) = strip_links(line);
    for url in &urls {
        classify_url(record, url);
    }
    for url in BARE_URL.find_iter(&cleaned) {
        classify_url(record, url.as_str());
    }
    if record.email.is_none() {
        if let Some(m) = EMAIL.find(&cleaned) {
            record.email = Some(m.as_str().to_string());
        }
    }

    // A short, sentence-free "Title at Company" line sets both fields once.
    let bare = BARE_URL.replace_all(&cleaned, "").trim().to_string();
    if record.title.is_none() && record.company.is_none() && !bare.contains(". ") {
        if let Some(c) = TITLE_AT.captures(&bare) {
            record.title = Some(c[1].trim_matches(|ch: char| ch == '*' || ch.is_whitespace()).to_string());
            record.company = Some(c[2].trim().trim_end_matches(['.', ',']).trim().to_string());
            return;
        }
    }

    // Lines that were only links or bullets carry no prose.
    let prose = bare.trim_start_matches(['-', '*', '+']).trim();
    if !prose.is_empty() {
        residual.push(prose.to_string());
    }
}
