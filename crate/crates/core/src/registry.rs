//! Name-keyed registries of interchangeable strategies.
//!
//! Every family of algorithms that can be swapped at runtime (linear solvers,
//! saddle-point solvers, experiments in the driver) is exposed through a
//! [`Registry`] holding constructors keyed by a stable name.

use std::fmt;

use thiserror::Error;

/// Lookup of a name that no constructor was registered under.
#[derive(Debug, Clone, Error)]
#[error("unknown {family} '{name}' (available: {available})")]
pub struct UnknownStrategy {
    pub family: &'static str,
    pub name: String,
    pub available: String,
}

struct Entry<T: ?Sized> {
    name: &'static str,
    summary: &'static str,
    build: Box<dyn Fn() -> Box<T> + Send + Sync>,
}

/// Constructors for one strategy family, in registration order.
pub struct Registry<T: ?Sized> {
    family: &'static str,
    entries: Vec<Entry<T>>,
}

impl<T: ?Sized> Registry<T> {
    pub fn new(family: &'static str) -> Self {
        Self {
            family,
            entries: Vec::new(),
        }
    }

    /// Registers `build` under `name`, replacing an earlier entry of the same name.
    pub fn register<F>(&mut self, name: &'static str, summary: &'static str, build: F)
    where
        F: Fn() -> Box<T> + Send + Sync + 'static,
    {
        let entry = Entry {
            name,
            summary,
            build: Box::new(build),
        };
        match self.entries.iter_mut().find(|e| e.name == name) {
            Some(slot) => *slot = entry,
            None => self.entries.push(entry),
        }
    }

    pub fn with<F>(mut self, name: &'static str, summary: &'static str, build: F) -> Self
    where
        F: Fn() -> Box<T> + Send + Sync + 'static,
    {
        self.register(name, summary, build);
        self
    }

    pub fn create(&self, name: &str) -> Result<Box<T>, UnknownStrategy> {
        self.entries
            .iter()
            .find(|e| e.name == name)
            .map(|e| (e.build)())
            .ok_or_else(|| UnknownStrategy {
                family: self.family,
                name: name.to_string(),
                available: self.names().join(", "),
            })
    }

    pub fn contains(&self, name: &str) -> bool {
        self.entries.iter().any(|e| e.name == name)
    }

    pub fn names(&self) -> Vec<&'static str> {
        self.entries.iter().map(|e| e.name).collect()
    }

    /// `(name, summary)` pairs in registration order.
    pub fn describe(&self) -> Vec<(&'static str, &'static str)> {
        self.entries.iter().map(|e| (e.name, e.summary)).collect()
    }

    pub fn family(&self) -> &'static str {
        self.family
    }
}

impl<T: ?Sized> fmt::Debug for Registry<T> {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("Registry")
            .field("family", &self.family)
            .field("entries", &self.names())
            .finish()
    }
}
