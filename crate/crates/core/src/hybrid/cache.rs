//! Bounded LRU cache of solved subinstances, with overlay scopes for concurrent subsolves.

use std::collections::{BTreeMap, HashMap};

use num_bigint::BigUint;

pub type Key = Vec<u8>;

/// Least-recently-used map with a fixed entry limit.
#[derive(Debug, Clone, Default)]
pub struct LruCache {
    capacity: usize,
    tick: u64,
    entries: HashMap<Key, (BigUint, u64)>,
    recency: BTreeMap<u64, Key>,
}

impl LruCache {
    pub fn new(capacity: usize) -> Self {
        LruCache {
            capacity,
            ..Default::default()
        }
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    fn touch(&mut self, key: &Key) {
        self.tick += 1;
        let tick = self.tick;
        if let Some(e) = self.entries.get_mut(key) {
            self.recency.remove(&e.1);
            e.1 = tick;
            self.recency.insert(tick, key.clone());
        }
    }

    pub fn get(&mut self, key: &Key) -> Option<BigUint> {
        if !self.entries.contains_key(key) {
            return None;
        }
        self.touch(key);
        Some(self.entries[key].0.clone())
    }

    /// Lookup without refreshing recency.
    pub fn peek(&self, key: &Key) -> Option<&BigUint> {
        self.entries.get(key).map(|e| &e.0)
    }

    pub fn put(&mut self, key: Key, value: BigUint) {
        if self.capacity == 0 {
            return;
        }
        if let Some(e) = self.entries.get_mut(&key) {
            e.0 = value;
            self.touch(&key);
            return;
        }
        while self.entries.len() >= self.capacity {
            let (_, old) = self.recency.pop_first().expect("non-empty");
            self.entries.remove(&old);
        }
        self.tick += 1;
        self.recency.insert(self.tick, key.clone());
        self.entries.insert(key, (value, self.tick));
    }
}

/// A view of the cache. The root scope owns the LRU; child scopes read through their
/// parents and buffer their own inserts until merged back in order.
#[derive(Debug)]
pub struct Scope<'p> {
    parent: Option<&'p Scope<'p>>,
    enabled: bool,
    root: Option<LruCache>,
    local: HashMap<Key, BigUint>,
    order: Vec<Key>,
}

/// Inserts made in a child scope, in insertion order.
pub type Overlay = Vec<(Key, BigUint)>;

impl<'p> Scope<'p> {
    pub fn root(capacity: usize, enabled: bool) -> Scope<'static> {
        Scope {
            parent: None,
            enabled,
            root: Some(LruCache::new(capacity)),
            local: HashMap::new(),
            order: Vec::new(),
        }
    }

    pub fn child(&self) -> Scope<'_> {
        Scope {
            parent: Some(self),
            enabled: self.enabled,
            root: None,
            local: HashMap::new(),
            order: Vec::new(),
        }
    }

    pub fn enabled(&self) -> bool {
        self.enabled
    }

    fn peek(&self, key: &Key) -> Option<&BigUint> {
        if let Some(v) = self.local.get(key) {
            return Some(v);
        }
        if let Some(lru) = &self.root {
            return lru.peek(key);
        }
        self.parent.and_then(|p| p.peek(key))
    }

    pub fn get(&mut self, key: &Key) -> Option<BigUint> {
        if !self.enabled {
            return None;
        }
        match &mut self.root {
            Some(lru) => lru.get(key),
            None => self.peek(key).cloned(),
        }
    }

    pub fn insert(&mut self, key: Key, value: BigUint) {
        if !self.enabled {
            return;
        }
        match &mut self.root {
            Some(lru) => lru.put(key, value),
            None => {
                if self.local.insert(key.clone(), value).is_none() {
                    self.order.push(key);
                }
            }
        }
    }

    pub fn into_overlay(mut self) -> Overlay {
        let order = std::mem::take(&mut self.order);
        order
            .into_iter()
            .map(|k| {
                let v = self.local.remove(&k).unwrap();
                (k, v)
            })
            .collect()
    }

    pub fn absorb(&mut self, overlay: Overlay) {
        for (k, v) in overlay {
            self.insert(k, v);
        }
    }

    pub fn len(&self) -> usize {
        self.root.as_ref().map_or(self.local.len(), LruCache::len)
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }
}
