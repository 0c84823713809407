//! Offline exploration: grow a tree of partial queries with a language-model
//! policy, turn each new node into SQL, validate it against the database and
//! keep the survivors as (schema fragment, SQL, description) triplets.
//!
//! One iteration is select-and-expand (the policy picks a candidate node and
//! one of its legal actions), simulate (the policy completes the node into
//! SQL, which must parse, execute and return a non-trivial result before a
//! description is requested) and backpropagate (visit, failure and success
//! bookkeeping along the node's path and on the schema graph).
//!
//! Negative feedback is a hard rule: a node whose failure count reaches
//! `failure_threshold` is never offered again, nor is anything below it.
//! Candidates are offered in ascending (failure count, visit count, id)
//! order, at most `candidate_fanout` per prompt.

mod action;
mod legal;
mod state;
mod tree;

use serde::{Deserialize, Serialize};
use serde_json::json;
use thiserror::Error;

pub use action::{table_matches, Action, ActionKind, AggFunc, ColumnRef, CompareOp, SortDir};
pub use legal::{
    enumerate_legal_actions, is_key_column, is_numeric_type, join_condition, predicate_op, representative_tables,
    schema_context_json,
};
pub use state::QueryState;
pub use tree::{ExplorationNode, ExplorationTree, NodeId};

use crate::knowledge_base::{Embedder, KbError, KnowledgeBase, Provenance, SchemaFragment, Triplet};
use crate::model_gateway::{
    parse_action_response, strip_code_fences, Gateway, GatewayError, PolicyRequest, PolicySession, RequestKind,
};
use crate::prompts::{self, section};
use crate::schema_graph::{table_id, GraphError, SchemaGraph};
use crate::sql_exec::{classify_query, parse_check, ExecSession, Executor, ResultClass, SqlError};
use crate::Scalar;

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ExplorationConfig {
    pub target_triplets: usize,
    pub max_iterations: u64,
    pub candidate_fanout: usize,
    pub failure_threshold: u64,
    pub row_limit: usize,
    /// Nodes at this depth are not expanded further.
    pub max_depth: usize,
}

impl Default for ExplorationConfig {
    fn default() -> Self {
        ExplorationConfig {
            target_triplets: 50,
            max_iterations: 200,
            candidate_fanout: 4,
            failure_threshold: 3,
            row_limit: 100,
            max_depth: 8,
        }
    }
}

impl ExplorationConfig {
    pub fn validate(&self) -> Result<(), ExploreError> {
        let fields = [
            ("target_triplets", self.target_triplets as u64),
            ("max_iterations", self.max_iterations),
            ("candidate_fanout", self.candidate_fanout as u64),
            ("failure_threshold", self.failure_threshold),
            ("row_limit", self.row_limit as u64),
            ("max_depth", self.max_depth as u64),
        ];
        match fields.iter().find(|(_, v)| *v == 0) {
            Some((name, _)) => Err(ExploreError::Config(format!("{name} must be positive"))),
            None => Ok(()),
        }
    }
}

#[derive(Debug, Error)]
pub enum ExploreError {
    #[error("invalid exploration config: {0}")]
    Config(String),
    #[error("policy unavailable: {0}")]
    Policy(#[from] GatewayError),
    #[error(transparent)]
    Graph(#[from] GraphError),
    #[error(transparent)]
    Kb(#[from] KbError),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum SimulationStatus {
    SyntaxError,
    ExecutionError,
    EmptyResult,
    TrivialResult,
    Success,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct SimulationOutcome {
    pub status: SimulationStatus,
    pub sql: Option<String>,
    pub description: Option<String>,
    pub error_detail: Option<String>,
}

impl SimulationOutcome {
    fn failed(status: SimulationStatus, sql: String, detail: impl Into<String>) -> Self {
        SimulationOutcome { status, sql: Some(sql), description: None, error_detail: Some(detail.into()) }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum IterationStatus {
    Simulated(SimulationStatus),
    /// The policy answered with an unusable action twice.
    PolicyFault,
}

/// What happened in one iteration.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct IterationRecord {
    pub iteration: u64,
    /// Candidate node ids offered to the policy, in prompt order.
    pub candidates: Vec<NodeId>,
    /// Node the policy chose to expand.
    pub expanded: Option<NodeId>,
    pub new_node: Option<NodeId>,
    pub action: Option<String>,
    pub status: IterationStatus,
    pub sql: Option<String>,
    pub detail: Option<String>,
    pub triplet: Option<String>,
    /// The SQL matched an already stored triplet.
    pub duplicate: bool,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum StopReason {
    TargetReached,
    MaxIterations,
    /// No candidate node has a legal action left.
    Exhausted,
    Aborted,
}

/// Result of [`run_exploration`]. On abort the triplets gathered so far are
/// kept and `aborted` holds the cause.
#[derive(Debug, Clone)]
pub struct ExplorationRun<F> {
    pub kb: KnowledgeBase<F>,
    pub tree: ExplorationTree,
    pub iterations: u64,
    pub llm_calls: u64,
    pub db_calls: u64,
    pub log: Vec<IterationRecord>,
    pub stop_reason: StopReason,
    pub aborted: Option<String>,
}

impl<F: Scalar> ExplorationRun<F> {
    pub fn triplets(&self) -> &[Triplet<F>] {
        self.kb.triplets()
    }
}

/// One exploration session. Owns its tree; borrows the graph mutably to
/// record feedback.
pub struct Explorer<'a, F: Scalar> {
    graph: &'a mut SchemaGraph,
    policy: PolicySession<'a>,
    exec: ExecSession<'a>,
    embedder: &'a dyn Embedder<F>,
    config: ExplorationConfig,
    tree: ExplorationTree,
    kb: KnowledgeBase<F>,
    log: Vec<IterationRecord>,
    iteration: u64,
}

/// Expansion picked by the policy.
#[derive(Debug, Clone)]
pub enum Expansion {
    Expanded {
        parent: NodeId,
        node: NodeId,
        action: String,
    },
    PolicyFault {
        node: NodeId,
        detail: String,
    },
    /// No candidate node has a legal action left.
    Exhausted,
}

impl<'a, F: Scalar> Explorer<'a, F> {
    pub fn new(
        graph: &'a mut SchemaGraph,
        config: ExplorationConfig,
        gateway: &'a Gateway,
        executor: &'a Executor,
        embedder: &'a dyn Embedder<F>,
    ) -> Result<Self, ExploreError> {
        config.validate()?;
        Ok(Explorer {
            graph,
            policy: gateway.session(),
            exec: executor.session(),
            embedder,
            config,
            tree: ExplorationTree::new(),
            kb: KnowledgeBase::new(embedder.dimension()),
            log: Vec::new(),
            iteration: 0,
        })
    }

    pub fn tree(&self) -> &ExplorationTree {
        &self.tree
    }

    pub fn kb(&self) -> &KnowledgeBase<F> {
        &self.kb
    }

    fn display_name(&self) -> impl Fn(&str) -> String + '_ {
        |fqn: &str| self.graph.short_table_name(fqn)
    }

    /// Legal actions of a node that have not been expanded yet.
    pub fn open_actions(&self, id: NodeId) -> Vec<Action> {
        let node = &self.tree.nodes()[id];
        if node.depth() >= self.config.max_depth {
            return Vec::new();
        }
        let used = self.tree.child_actions(id);
        enumerate_legal_actions(&node.query_state, self.graph).into_iter().filter(|a| !used.contains(&a)).collect()
    }

    /// Nodes offered to the policy, best first.
    pub fn candidates(&self) -> Vec<(NodeId, Vec<Action>)> {
        let mut ranked: Vec<&ExplorationNode> =
            self.tree.nodes().iter().filter(|n| !self.tree.is_excluded(n.id, self.config.failure_threshold)).collect();
        ranked.sort_by_key(|n| (n.failure_count, n.visit_count, n.id));
        let mut out = Vec::new();
        for n in ranked {
            let open = self.open_actions(n.id);
            if !open.is_empty() {
                out.push((n.id, open));
                if out.len() == self.config.candidate_fanout {
                    break;
                }
            }
        }
        out
    }

    fn action_prompt(&self, candidates: &[(NodeId, Vec<Action>)], rejection: Option<&str>) -> PolicyRequest {
        let name = self.display_name();
        let mut text = String::new();
        let mut tables: Vec<String> = Vec::new();
        for (id, open) in candidates {
            let node = &self.tree.nodes()[*id];
            let path: Vec<String> = node.query_state.actions.iter().map(|a| a.render(&name)).collect();
            text.push_str(&format!(
                "@{id} depth={} visits={} failures={} triplets={}\npath: {}\nlegal actions:\n",
                node.depth(),
                node.visit_count,
                node.failure_count,
                node.success_triplets.len(),
                if path.is_empty() { "(empty query)".to_string() } else { path.join(" | ") },
            ));
            for a in open {
                text.push_str("- ");
                text.push_str(&a.render(&name));
                text.push('\n');
                for c in a.columns() {
                    if !tables.contains(&c.table) {
                        tables.push(c.table.clone());
                    }
                }
            }
            text.push('\n');
        }
        let mut req = PolicyRequest::new(RequestKind::ActionSelection)
            .section(section::ROLE, prompts::EXPLORER_ROLE)
            .section(section::INSTRUCTIONS, prompts::ACTION_SELECTION_INSTRUCTIONS)
            .section(section::SCHEMA_CONTEXT, schema_context_json(self.graph, &tables).to_string())
            .section(section::CANDIDATES, text.trim_end());
        if let Some(reason) = rejection {
            req = req.section(section::FEEDBACK, format!("Your previous answer was rejected: {reason}"));
        }
        req
    }

    /// Resolves `@id action` (or a bare action, meaning the first candidate).
    fn parse_choice(
        &self,
        response: &str,
        candidates: &[(NodeId, Vec<Action>)],
    ) -> Result<(NodeId, Action), (NodeId, GatewayError)> {
        let line = response.lines().map(str::trim).find(|l| !l.is_empty()).unwrap_or("");
        let first = candidates[0].0;
        let (node, rest) = match line.strip_prefix('@') {
            Some(tail) => {
                let (id, rest) = tail.split_once(char::is_whitespace).unwrap_or((tail, ""));
                match id.parse::<NodeId>().ok().filter(|id| candidates.iter().any(|(c, _)| c == id)) {
                    Some(id) => (id, rest),
                    None => return Err((first, GatewayError::IllegalAction(line.to_string()))),
                }
            }
            None => (first, line),
        };
        let legal = &candidates.iter().find(|(c, _)| *c == node).expect("candidate present").1;
        parse_action_response(rest, legal).map(|a| (node, a)).map_err(|e| (node, e))
    }

    /// Asks the policy for a (node, action) pair and adds the child. A
    /// policy fault is retried once; a second fault marks the offending node
    /// with one failure and skips the step.
    pub fn select_and_expand(&mut self) -> Result<Expansion, ExploreError> {
        let candidates = self.candidates();
        if candidates.is_empty() {
            return Ok(Expansion::Exhausted);
        }
        let mut rejection: Option<String> = None;
        for attempt in 0..2 {
            let request = self.action_prompt(&candidates, rejection.as_deref());
            let response = self.policy.complete(&request)?;
            match self.parse_choice(&response, &candidates) {
                Ok((parent, action)) => {
                    let rendered = action.render(&self.display_name());
                    let node = self.tree.expand(parent, action);
                    return Ok(Expansion::Expanded { parent, node, action: rendered });
                }
                Err((node, err)) => {
                    tracing::warn!(attempt, %err, "policy fault during action selection");
                    if attempt == 1 {
                        self.tree.node_mut(node).failure_count += 1;
                        return Ok(Expansion::PolicyFault { node, detail: err.to_string() });
                    }
                    rejection = Some(err.to_string());
                }
            }
        }
        unreachable!("loop returns on the second attempt")
    }

    fn sql_prompt(&self, state: &QueryState) -> PolicyRequest {
        PolicyRequest::new(RequestKind::SqlCompletion)
            .section(section::ROLE, prompts::EXPLORER_ROLE)
            .section(section::INSTRUCTIONS, prompts::SQL_COMPLETION_INSTRUCTIONS)
            .section(section::SCHEMA_CONTEXT, schema_context_json(self.graph, &state.joined_tables).to_string())
            .section(section::QUERY_STATE, serde_json::to_string(state).expect("state serializes"))
    }

    fn fragment(&self, state: &QueryState) -> SchemaFragment {
        let mut columns: Vec<String> = state.referenced_columns().iter().map(ColumnRef::fqn).collect();
        for (l, r) in &state.joins {
            for c in [l.fqn(), r.fqn()] {
                if !columns.contains(&c) {
                    columns.push(c);
                }
            }
        }
        let mut groups: Vec<String> = Vec::new();
        for t in &state.joined_tables {
            if let Some(g) = self.graph.group_of(t) {
                if !groups.iter().any(|x| x == g) {
                    groups.push(g.to_string());
                }
            }
        }
        SchemaFragment {
            tables: state.joined_tables.clone(),
            columns,
            joins: state.joins.iter().map(|(l, r)| (l.fqn(), r.fqn())).collect(),
            groups,
        }
    }

    /// Completes a node into SQL and validates it: parse, execute, classify,
    /// and only then describe.
    pub fn simulate(&mut self, node: NodeId) -> Result<SimulationOutcome, ExploreError> {
        let state = self.tree.nodes()[node].query_state.clone();
        let sql = strip_code_fences(&self.policy.complete(&self.sql_prompt(&state))?);
        if let Err(e) = parse_check(&sql) {
            return Ok(SimulationOutcome::failed(SimulationStatus::SyntaxError, sql, e.to_string()));
        }
        let result = match self.exec.execute(&sql, self.config.row_limit) {
            Ok(r) => r,
            Err(SqlError::Timeout) => {
                return Ok(SimulationOutcome::failed(SimulationStatus::ExecutionError, sql, "timeout"))
            }
            Err(e) => return Ok(SimulationOutcome::failed(SimulationStatus::ExecutionError, sql, e.to_string())),
        };
        match classify_query(&sql, &result) {
            ResultClass::Empty => return Ok(SimulationOutcome::failed(SimulationStatus::EmptyResult, sql, "no rows")),
            ResultClass::Trivial | ResultClass::Error => {
                return Ok(SimulationOutcome::failed(SimulationStatus::TrivialResult, sql, "trivial result"))
            }
            ResultClass::NonTrivial => {}
        }
        let fragment = serde_json::to_string(&self.fragment(&state)).expect("fragment serializes");
        let request = PolicyRequest::new(RequestKind::NlDescription)
            .section(section::ROLE, prompts::EXPLORER_ROLE)
            .section(section::INSTRUCTIONS, prompts::DESCRIPTION_INSTRUCTIONS)
            .section(section::SCHEMA_CONTEXT, fragment)
            .section(section::SQL, sql.clone());
        let description = self.policy.complete(&request)?.trim().to_string();
        Ok(SimulationOutcome {
            status: SimulationStatus::Success,
            sql: Some(sql),
            description: Some(description),
            error_detail: None,
        })
    }

    /// Records the outcome along the node's path (root excluded) and, on
    /// success, on every table and column node the fragment touches.
    /// Returns the triplet id and whether it already existed.
    pub fn backpropagate(
        &mut self,
        node: NodeId,
        outcome: &SimulationOutcome,
    ) -> Result<Option<(String, bool)>, ExploreError> {
        let path = self.tree.path(node);
        for &n in &path {
            self.tree.node_mut(n).visit_count += 1;
        }
        if outcome.status != SimulationStatus::Success {
            for &n in &path {
                self.tree.node_mut(n).failure_count += 1;
            }
            return Ok(None);
        }
        let sql = outcome.sql.clone().unwrap_or_default();
        let state = self.tree.nodes()[node].query_state.clone();
        let fragment = self.fragment(&state);
        let (id, duplicate) = match self.kb.find_by_sql(&sql) {
            Some(existing) => (existing.id.clone(), true),
            None => {
                let id = format!("t{:05}", self.kb.len() + 1);
                let mut root_path = path.clone();
                root_path.reverse();
                self.kb.insert_triplet(Triplet {
                    id: id.clone(),
                    fragment: fragment.clone(),
                    embedding: self.embedder.embed(&sql)?,
                    sql,
                    description: outcome.description.clone().unwrap_or_default(),
                    provenance: Provenance { node, path: root_path, iteration: self.iteration },
                })?;
                (id, false)
            }
        };
        for &n in &path {
            let list = &mut self.tree.node_mut(n).success_triplets;
            if !list.contains(&id) {
                list.push(id.clone());
            }
        }
        for t in &fragment.tables {
            self.graph.record_feedback(&table_id(t), &id)?;
        }
        for c in state.referenced_columns() {
            if let Some(fid) = self.graph.field_id_for(&c.table, &c.column) {
                self.graph.record_feedback(&fid, &id)?;
            }
        }
        Ok(Some((id, duplicate)))
    }

    /// One select/expand, simulate, backpropagate cycle.
    pub fn step(&mut self) -> Result<Option<IterationRecord>, ExploreError> {
        let candidates: Vec<NodeId> = self.candidates().into_iter().map(|(id, _)| id).collect();
        if candidates.is_empty() {
            return Ok(None);
        }
        self.iteration += 1;
        self.tree.node_mut(ExplorationTree::ROOT).visit_count += 1;
        let mut record = IterationRecord {
            iteration: self.iteration,
            candidates,
            expanded: None,
            new_node: None,
            action: None,
            status: IterationStatus::PolicyFault,
            sql: None,
            detail: None,
            triplet: None,
            duplicate: false,
        };
        match self.select_and_expand()? {
            Expansion::Exhausted => unreachable!("candidates checked above"),
            Expansion::PolicyFault { node, detail } => {
                record.expanded = Some(node);
                record.detail = Some(detail);
            }
            Expansion::Expanded { parent, node, action } => {
                record.expanded = Some(parent);
                record.new_node = Some(node);
                record.action = Some(action);
                let outcome = self.simulate(node)?;
                record.status = IterationStatus::Simulated(outcome.status);
                record.sql = outcome.sql.clone();
                record.detail = outcome.error_detail.clone();
                if let Some((id, duplicate)) = self.backpropagate(node, &outcome)? {
                    record.triplet = Some(id);
                    record.duplicate = duplicate;
                }
            }
        }
        self.log.push(record.clone());
        Ok(Some(record))
    }

    /// Iterates until the target is met, the iteration budget runs out, the
    /// tree is exhausted or the policy becomes unavailable.
    pub fn run(mut self) -> ExplorationRun<F> {
        let mut aborted = None;
        let stop_reason = loop {
            if self.kb.len() >= self.config.target_triplets {
                break StopReason::TargetReached;
            }
            if self.iteration >= self.config.max_iterations {
                break StopReason::MaxIterations;
            }
            match self.step() {
                Ok(Some(_)) => {}
                Ok(None) => break StopReason::Exhausted,
                Err(e) => {
                    tracing::error!(error = %e, "exploration aborted");
                    aborted = Some(e.to_string());
                    break StopReason::Aborted;
                }
            }
        };
        ExplorationRun {
            iterations: self.iteration,
            llm_calls: self.policy.calls(),
            db_calls: self.exec.calls(),
            kb: self.kb,
            tree: self.tree,
            log: self.log,
            stop_reason,
            aborted,
        }
    }
}

/// Runs a full exploration session over `graph`.
pub fn run_exploration<F: Scalar>(
    graph: &mut SchemaGraph,
    config: ExplorationConfig,
    gateway: &Gateway,
    executor: &Executor,
    embedder: &dyn Embedder<F>,
) -> Result<ExplorationRun<F>, ExploreError> {
    Ok(Explorer::new(graph, config, gateway, executor, embedder)?.run())
}

/// JSON summary of a run, for logs and reports.
pub fn run_summary<F: Scalar>(run: &ExplorationRun<F>) -> serde_json::Value {
    json!({
        "triplets": run.kb.len(),
        "iterations": run.iterations,
        "llm_calls": run.llm_calls,
        "db_calls": run.db_calls,
        "tree_nodes": run.tree.len(),
        "stop_reason": run.stop_reason,
        "aborted": run.aborted,
    })
}
