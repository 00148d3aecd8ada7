use std::fmt;

use indexmap::IndexSet;

/// Dense identifier of a normalized resource string.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct PageId(pub u32);

impl fmt::Display for PageId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "#{}", self.0)
    }
}

/// Bijective map between resource strings and [`PageId`]s.
///
/// Ids are handed out in first-seen order and never reused.
#[derive(Clone, Debug, Default)]
pub struct Interner {
    pages: IndexSet<String>,
}

impl Interner {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn intern(&mut self, resource: &str) -> PageId {
        if let Some(idx) = self.pages.get_index_of(resource) {
            return PageId(idx as u32);
        }
        let (idx, _) = self.pages.insert_full(resource.to_owned());
        PageId(idx as u32)
    }

    pub fn get(&self, resource: &str) -> Option<PageId> {
        self.pages.get_index_of(resource).map(|i| PageId(i as u32))
    }

    /// Panics if `id` was not produced by this interner.
    pub fn resolve(&self, id: PageId) -> &str {
        self.pages
            .get_index(id.0 as usize)
            .map(String::as_str)
            .expect("page id from a different interner")
    }

    pub fn len(&self) -> usize {
        self.pages.len()
    }

    pub fn is_empty(&self) -> bool {
        self.pages.is_empty()
    }
}
