//! Compiled protocols and their cached monitors.

use std::collections::{BTreeMap, HashMap};
use std::path::Path;
use std::sync::{Arc, RwLock};

use thiserror::Error;

use crate::monitor::{build_fsm, parse_graph, write_graph, GraphError, MonitorError, MonitorFsm};
use crate::projection::{project, LocalProtocol, ProjectionError};
use crate::scribble::{
    check_with_bindings, expand, parse_global, Bindings, Diagnostic, ExpandError, GlobalProtocol,
    ParseError,
};

#[derive(Debug, Error)]
pub enum CompileError {
    #[error(transparent)]
    Parse(#[from] ParseError),
    #[error("{}", .0.iter().map(|d| d.to_string()).collect::<Vec<_>>().join("\n"))]
    Diagnostics(Vec<Diagnostic>),
    #[error(transparent)]
    Expand(#[from] ExpandError),
    #[error(transparent)]
    Projection(#[from] ProjectionError),
    #[error(transparent)]
    Monitor(#[from] MonitorError),
    #[error("{path}: {source}")]
    Graph { path: String, source: GraphError },
    #[error("{path}: {source}")]
    Io {
        path: String,
        source: std::io::Error,
    },
    #[error("cache file {path} does not match a known protocol role")]
    StaleCache { path: String },
}

/// A protocol after parsing, checking, expansion, projection and FSM build.
#[derive(Debug, Clone)]
pub struct CompiledProtocol {
    pub global: GlobalProtocol,
    pub locals: BTreeMap<String, LocalProtocol>,
    pub fsms: BTreeMap<String, Arc<MonitorFsm>>,
}

impl CompiledProtocol {
    pub fn compile(source: &str, bindings: &Bindings) -> Result<Self, CompileError> {
        let parsed = parse_global(source)?;
        Self::from_global(&parsed, bindings)
    }

    pub fn from_global(parsed: &GlobalProtocol, bindings: &Bindings) -> Result<Self, CompileError> {
        let diags = check_with_bindings(parsed, bindings);
        if !diags.is_empty() {
            return Err(CompileError::Diagnostics(diags));
        }
        let global = expand(parsed, bindings)?;
        let mut locals = BTreeMap::new();
        let mut fsms = BTreeMap::new();
        for role in global.role_names() {
            let lp = project(&global, &role)?;
            fsms.insert(role.clone(), Arc::new(build_fsm(&lp)?));
            locals.insert(role, lp);
        }
        Ok(CompiledProtocol {
            global,
            locals,
            fsms,
        })
    }

    pub fn name(&self) -> &str {
        &self.global.name
    }

    pub fn role_names(&self) -> Vec<String> {
        self.global.role_names()
    }

    /// Group or role type of a concrete role.
    pub fn family_of(&self, role: &str) -> Option<String> {
        self.global.role(role).map(|d| d.family_name().to_string())
    }

    /// Concrete roles named `name`, or belonging to the family `name`.
    pub fn roles_matching(&self, name: &str) -> Vec<String> {
        self.global
            .roles
            .iter()
            .filter(|d| d.canonical() == name || d.family_name() == name)
            .map(|d| d.canonical().to_string())
            .collect()
    }

    /// Family members ordered by index, for position-indexed lookup.
    pub fn family_member(&self, family: &str, index: i64) -> Option<String> {
        self.global
            .roles
            .iter()
            .find(|d| d.family_name() == family && d.index == Some(index))
            .map(|d| d.canonical().to_string())
    }
}

/// Protocols known to a runtime, keyed by protocol name.
#[derive(Debug, Default)]
pub struct ProtocolStore {
    protocols: RwLock<HashMap<String, Arc<CompiledProtocol>>>,
}

impl ProtocolStore {
    pub fn new() -> Self {
        Self::default()
    }

    /// Compiles the first protocol in `source` and registers it under its
    /// name, replacing any earlier entry.
    pub fn add_source(
        &self,
        source: &str,
        bindings: &Bindings,
    ) -> Result<Arc<CompiledProtocol>, CompileError> {
        let c = Arc::new(CompiledProtocol::compile(source, bindings)?);
        self.insert(c.clone());
        Ok(c)
    }

    pub fn insert(&self, c: Arc<CompiledProtocol>) {
        self.protocols
            .write()
            .unwrap()
            .insert(c.name().to_string(), c);
    }

    pub fn get(&self, name: &str) -> Option<Arc<CompiledProtocol>> {
        self.protocols.read().unwrap().get(name).cloned()
    }

    pub fn names(&self) -> Vec<String> {
        let mut v: Vec<String> = self.protocols.read().unwrap().keys().cloned().collect();
        v.sort();
        v
    }

    /// Writes one `<protocol>@<role>.fsm` graph file per role.
    pub fn write_cache(&self, dir: &Path) -> Result<usize, CompileError> {
        let io = |path: &Path, source| CompileError::Io {
            path: path.display().to_string(),
            source,
        };
        std::fs::create_dir_all(dir).map_err(|e| io(dir, e))?;
        let mut n = 0;
        for c in self.protocols.read().unwrap().values() {
            for (role, fsm) in &c.fsms {
                let path = dir.join(format!("{}@{role}.fsm", c.name()));
                std::fs::write(&path, write_graph(fsm)).map_err(|e| io(&path, e))?;
                n += 1;
            }
        }
        Ok(n)
    }

    /// Replaces monitors with the graphs cached in `dir`.
    pub fn load_cache(&self, dir: &Path) -> Result<usize, CompileError> {
        let io = |path: &Path, source| CompileError::Io {
            path: path.display().to_string(),
            source,
        };
        let mut n = 0;
        let mut entries: Vec<_> = std::fs::read_dir(dir)
            .map_err(|e| io(dir, e))?
            .filter_map(Result::ok)
            .map(|e| e.path())
            .filter(|p| p.extension().is_some_and(|x| x == "fsm"))
            .collect();
        entries.sort();
        let mut protocols = self.protocols.write().unwrap();
        for path in entries {
            let text = std::fs::read_to_string(&path).map_err(|e| io(&path, e))?;
            let fsm = parse_graph(&text).map_err(|source| CompileError::Graph {
                path: path.display().to_string(),
                source,
            })?;
            let stale = || CompileError::StaleCache {
                path: path.display().to_string(),
            };
            let entry = protocols.get_mut(&fsm.protocol).ok_or_else(stale)?;
            if !entry.fsms.contains_key(&fsm.role) {
                return Err(stale());
            }
            let role = fsm.role.clone();
            Arc::make_mut(entry).fsms.insert(role, Arc::new(fsm));
            n += 1;
        }
        Ok(n)
    }
}
