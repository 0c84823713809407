//! Prompt wording for every policy request.
//!
//! The GenAgent role line and the context-expansion instruction are fixed
//! strings that other tooling may match on, so keep them stable. The
//! response formats each prompt asks for are what the parsers in this crate
//! accept.

/// Section titles. Each request kind requires a subset of them, see
/// [`crate::model_gateway::RequestKind::required_sections`].
pub mod section {
    pub const ROLE: &str = "role";
    pub const INSTRUCTIONS: &str = "instructions";
    pub const SCHEMA_CONTEXT: &str = "schema_context";
    pub const QUERY_STATE: &str = "query_state";
    pub const CANDIDATES: &str = "candidates";
    pub const EXAMPLES: &str = "examples";
    pub const QUESTION: &str = "question";
    pub const SQL: &str = "sql";
    pub const SCHEMA_FRAGMENTS: &str = "schema_fragments";
    pub const RESULT_PREVIEW: &str = "result_preview";
    pub const FEEDBACK: &str = "feedback";
}

pub const GEN_AGENT_ROLE: &str = "You are an expert SQL data analyst.";

pub const CONTEXT_EXPANSION_INSTRUCTION: &str = "Given the user query and the retrieved schema fragments, analyze the relationships. If two tables are required but no join condition is present, identify and add the primary/foreign keys necessary to form a valid SQL join.";

pub const CONTEXT_EXPANSION_FORMAT: &str = "Answer with one item per line and nothing else. Write `table.column` for a column to add, or `left_table.column = right_table.column` for a join condition. Answer `NONE` if nothing is missing.";

pub const EXPLORER_ROLE: &str =
    "You are a database expert exploring an unfamiliar database by composing SQL queries one clause at a time.";

pub const ACTION_SELECTION_INSTRUCTIONS: &str = "Each candidate below is a partial query built by a sequence of actions, with its visit and failure counts. Candidates whose extensions failed often are less promising. Pick the most promising candidate and one of its legal actions. Answer with a single line: `@<candidate id> <action>`, where <action> is copied from that candidate's legal action list (text after `#` may be omitted).";

pub const SQL_COMPLETION_INSTRUCTIONS: &str = "Write one complete, executable SQLite query that realizes the query state below over the given schema. Prioritize using tables and columns that have associated documentation. The query must return a non-empty, non-trivial result. Answer with the SQL statement only.";

pub const DESCRIPTION_INSTRUCTIONS: &str = "Describe in one sentence the question that the SQL query below answers, as a user of this database would ask it. Answer with the sentence only.";

pub const KEYWORD_ROLE: &str = "You extract the semantic keywords of a database question: entity, attribute and value words that should be matched against column names and descriptions.";

pub const KEYWORD_INSTRUCTIONS: &str = "Answer with a JSON array of lowercase keyword strings.";

pub const KEYWORD_RETRY_NOTE: &str = "The previous attempt failed. Re-analyze the question for overlooked keywords.";

pub const GEN_AGENT_INSTRUCTIONS: &str = "Using only the schema context, write one SQLite query that answers the user query. Answer with the SQL statement only.";

pub const FIDELITY_ROLE: &str = "You check whether a query result answers a user's question.";

pub const FIDELITY_INSTRUCTIONS: &str =
    "Answer `ALIGNED` if the result answers the question, otherwise `MISMATCH` followed by a short reason.";

pub const INFO_AGENT_ROLE: &str = "You are a database expert.";

pub const GEN_AGENT_EXAMPLES_NOTE: &str = "Previously validated queries on this database, most relevant first:";
