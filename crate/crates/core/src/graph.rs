//! Immutable bipartite user-object network.
//!
//! Users and objects live in separate dense id spaces (`0..users` and
//! `0..objects`). Links are unary: an object is either collected by a user or
//! it is not. Both adjacency directions are stored in compressed form, sorted
//! ascending, so that spreading passes can walk object→user and user→object
//! without a transpose.

use std::fmt;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Dense user index.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub struct UserId(pub u32);

/// Dense object index.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub struct ObjectId(pub u32);

impl UserId {
    #[inline]
    pub fn index(self) -> usize {
        self.0 as usize
    }
}

impl ObjectId {
    #[inline]
    pub fn index(self) -> usize {
        self.0 as usize
    }
}

impl fmt::Display for UserId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "U{}", self.0)
    }
}

impl fmt::Display for ObjectId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "O{}", self.0)
    }
}

/// One user-object link as dense ids.
pub type Link = (u32, u32);

/// Compressed adjacency for one side of the graph.
#[derive(Debug, Clone, PartialEq, Eq)]
struct Csr {
    offsets: Vec<usize>,
    targets: Vec<u32>,
}

impl Csr {
    fn row(&self, i: usize) -> &[u32] {
        &self.targets[self.offsets[i]..self.offsets[i + 1]]
    }

    fn degree(&self, i: usize) -> usize {
        self.offsets[i + 1] - self.offsets[i]
    }

    /// Builds rows from links already sorted by (row, target) and deduplicated.
    fn from_sorted(rows: usize, sorted: impl Iterator<Item = (u32, u32)>, nnz: usize) -> Self {
        let mut offsets = vec![0usize; rows + 1];
        let mut targets = Vec::with_capacity(nnz);
        for (r, t) in sorted {
            offsets[r as usize + 1] += 1;
            targets.push(t);
        }
        for i in 0..rows {
            offsets[i + 1] += offsets[i];
        }
        Csr { offsets, targets }
    }
}

/// The unary user-object adjacency with precomputed degrees.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct BipartiteGraph {
    users: usize,
    objects: usize,
    user_adj: Csr,
    object_adj: Csr,
}

impl BipartiteGraph {
    /// Builds the canonical graph from `(user, object)` pairs.
    ///
    /// Duplicate pairs collapse to one link. An out-of-range id is rejected
    /// with the index of the offending record.
    pub fn build(links: &[Link], users: usize, objects: usize) -> Result<Self> {
        for (index, &(u, o)) in links.iter().enumerate() {
            if u as usize >= users || o as usize >= objects {
                return Err(Error::LinkOutOfRange {
                    index,
                    user: u,
                    object: o,
                    users,
                    objects,
                });
            }
        }
        let mut by_user: Vec<Link> = links.to_vec();
        by_user.sort_unstable();
        by_user.dedup();
        Ok(Self::from_canonical(by_user, users, objects))
    }

    /// `links` must be sorted by (user, object), deduplicated and in range.
    pub(crate) fn from_canonical(by_user: Vec<Link>, users: usize, objects: usize) -> Self {
        let nnz = by_user.len();
        let user_adj = Csr::from_sorted(users, by_user.iter().copied(), nnz);
        let mut by_object: Vec<Link> = by_user.iter().map(|&(u, o)| (o, u)).collect();
        by_object.sort_unstable();
        let object_adj = Csr::from_sorted(objects, by_object.into_iter(), nnz);
        BipartiteGraph {
            users,
            objects,
            user_adj,
            object_adj,
        }
    }

    pub fn users(&self) -> usize {
        self.users
    }

    pub fn objects(&self) -> usize {
        self.objects
    }

    /// Total link count E.
    pub fn links(&self) -> usize {
        self.user_adj.targets.len()
    }

    /// Objects collected by `user`, ascending.
    #[inline]
    pub fn user_objects(&self, user: usize) -> &[u32] {
        self.user_adj.row(user)
    }

    /// Users who collected `object`, ascending.
    #[inline]
    pub fn object_users(&self, object: usize) -> &[u32] {
        self.object_adj.row(object)
    }

    #[inline]
    pub fn user_degree(&self, user: usize) -> usize {
        self.user_adj.degree(user)
    }

    #[inline]
    pub fn object_degree(&self, object: usize) -> usize {
        self.object_adj.degree(object)
    }

    pub fn user_degrees(&self) -> Vec<usize> {
        (0..self.users).map(|i| self.user_degree(i)).collect()
    }

    pub fn object_degrees(&self) -> Vec<usize> {
        (0..self.objects).map(|a| self.object_degree(a)).collect()
    }

    pub fn max_user_degree(&self) -> usize {
        (0..self.users).map(|i| self.user_degree(i)).max().unwrap_or(0)
    }

    pub fn max_object_degree(&self) -> usize {
        (0..self.objects)
            .map(|a| self.object_degree(a))
            .max()
            .unwrap_or(0)
    }

    /// True when `user` collected `object`.
    pub fn has_link(&self, user: usize, object: u32) -> bool {
        self.user_objects(user).binary_search(&object).is_ok()
    }

    /// All links in (user, object) lexicographic order.
    pub fn edges(&self) -> impl Iterator<Item = Link> + '_ {
        (0..self.users).flat_map(move |u| {
            self.user_objects(u)
                .iter()
                .map(move |&o| (u as u32, o))
        })
    }

    /// All links enumerated through the object side, in (user, object) order.
    pub fn edges_via_objects(&self) -> Vec<Link> {
        let mut out: Vec<Link> = (0..self.objects)
            .flat_map(|o| self.object_users(o).iter().map(move |&u| (u, o as u32)))
            .collect();
        out.sort_unstable();
        out
    }

    pub fn stats(&self) -> GraphStats {
        GraphStats::of(self)
    }
}

/// Size and sparsity of a graph.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GraphStats {
    pub users: usize,
    pub objects: usize,
    pub links: usize,
    /// `links / (users * objects)`, `None` when there are no possible pairs.
    pub sparsity: Option<f64>,
}

impl GraphStats {
    pub fn of(g: &BipartiteGraph) -> Self {
        Self::from_counts(g.users(), g.objects(), g.links())
    }

    pub fn from_counts(users: usize, objects: usize, links: usize) -> Self {
        let pairs = users as u128 * objects as u128;
        let sparsity = (pairs > 0).then(|| links as f64 / pairs as f64);
        GraphStats {
            users,
            objects,
            links,
            sparsity,
        }
    }

    /// Exact `(numerator, denominator)` of the sparsity ratio.
    pub fn sparsity_ratio(&self) -> (u128, u128) {
        (self.links as u128, self.users as u128 * self.objects as u128)
    }
}

impl fmt::Display for GraphStats {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let (num, den) = self.sparsity_ratio();
        match self.sparsity {
            Some(s) => write!(
                f,
                "users={} objects={} links={} sparsity={:.3e} ({}/{})",
                self.users, self.objects, self.links, s, num, den
            ),
            None => write!(
                f,
                "users={} objects={} links={} sparsity=undefined",
                self.users, self.objects, self.links
            ),
        }
    }
}
