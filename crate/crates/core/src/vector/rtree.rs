//! Guttman R-tree with quadratic split.

/// Plain `[min_x, min_y, max_x, max_y]` box; srid checks happen above.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Rect {
    pub min_x: f64,
    pub min_y: f64,
    pub max_x: f64,
    pub max_y: f64,
}

impl Rect {
    pub fn point(x: f64, y: f64) -> Self {
        Rect { min_x: x, min_y: y, max_x: x, max_y: y }
    }

    fn area(&self) -> f64 {
        (self.max_x - self.min_x) * (self.max_y - self.min_y)
    }

    fn union(&self, o: &Rect) -> Rect {
        Rect {
            min_x: self.min_x.min(o.min_x),
            min_y: self.min_y.min(o.min_y),
            max_x: self.max_x.max(o.max_x),
            max_y: self.max_y.max(o.max_y),
        }
    }

    fn enlargement(&self, o: &Rect) -> f64 {
        self.union(o).area() - self.area()
    }

    pub fn intersects(&self, o: &Rect) -> bool {
        self.min_x <= o.max_x && o.min_x <= self.max_x && self.min_y <= o.max_y && o.min_y <= self.max_y
    }

    pub fn contains(&self, o: &Rect) -> bool {
        self.min_x <= o.min_x && self.min_y <= o.min_y && self.max_x >= o.max_x && self.max_y >= o.max_y
    }
}

#[derive(Debug, Clone)]
enum Node<T> {
    Leaf(Vec<(Rect, T)>),
    Internal(Vec<(Rect, Box<Node<T>>)>),
}

/// Counters filled by [`RTree::search_counted`].
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub struct SearchStats {
    pub nodes_visited: usize,
    pub leaves_visited: usize,
}

#[derive(Debug, Clone)]
pub struct RTree<T> {
    root: Node<T>,
    max_entries: usize,
    min_entries: usize,
    len: usize,
}

pub const DEFAULT_FANOUT: usize = 16;

impl<T: Copy> Default for RTree<T> {
    fn default() -> Self {
        RTree::with_fanout(DEFAULT_FANOUT)
    }
}

trait Entry {
    fn rect(&self) -> &Rect;
}

impl<T> Entry for (Rect, T) {
    fn rect(&self) -> &Rect {
        &self.0
    }
}

impl<T: Copy> RTree<T> {
    pub fn with_fanout(max_entries: usize) -> Self {
        assert!(max_entries >= 4, "fan-out must be at least 4");
        RTree { root: Node::Leaf(Vec::new()), max_entries, min_entries: (max_entries * 2 / 5).max(2), len: 0 }
    }

    pub fn len(&self) -> usize {
        self.len
    }

    pub fn is_empty(&self) -> bool {
        self.len == 0
    }

    pub fn insert(&mut self, rect: Rect, item: T) {
        let (max, min) = (self.max_entries, self.min_entries);
        if let Some(sibling) = insert_rec(&mut self.root, rect, item, max, min) {
            let old = std::mem::replace(&mut self.root, Node::Leaf(Vec::new()));
            let old_rect = node_rect(&old).expect("split node is non-empty");
            let sib_rect = node_rect(&sibling).expect("split node is non-empty");
            self.root = Node::Internal(vec![(old_rect, Box::new(old)), (sib_rect, Box::new(sibling))]);
        }
        self.len += 1;
    }

    pub fn search(&self, query: &Rect) -> Vec<T> {
        self.search_counted(query, &mut SearchStats::default())
    }

    pub fn search_counted(&self, query: &Rect, stats: &mut SearchStats) -> Vec<T> {
        let mut out = Vec::new();
        let mut stack = vec![&self.root];
        while let Some(node) = stack.pop() {
            stats.nodes_visited += 1;
            match node {
                Node::Leaf(entries) => {
                    stats.leaves_visited += 1;
                    out.extend(entries.iter().filter(|(r, _)| r.intersects(query)).map(|(_, t)| *t));
                }
                Node::Internal(children) => {
                    stack.extend(children.iter().filter(|(r, _)| r.intersects(query)).map(|(_, c)| c.as_ref()));
                }
            }
        }
        out
    }

    pub fn leaf_count(&self) -> usize {
        fn walk<T>(n: &Node<T>) -> usize {
            match n {
                Node::Leaf(_) => 1,
                Node::Internal(c) => c.iter().map(|(_, n)| walk(n)).sum(),
            }
        }
        walk(&self.root)
    }

    pub fn depth(&self) -> usize {
        let mut d = 1;
        let mut n = &self.root;
        while let Node::Internal(c) = n {
            d += 1;
            n = &c[0].1;
        }
        d
    }

    /// Walks the whole tree and checks the structural invariants: every
    /// stored rectangle contains its subtree, leaves sit at one depth, node
    /// sizes respect the fan-out and the entry count matches `len`.
    pub fn validate(&self) -> Result<(), String> {
        let mut leaf_depth = None;
        let count = validate_node(&self.root, None, 0, &mut leaf_depth, self.max_entries, self.min_entries, true)?;
        if count != self.len {
            return Err(format!("tree holds {count} entries, len says {}", self.len));
        }
        Ok(())
    }
}

fn validate_node<T>(
    node: &Node<T>,
    bound: Option<&Rect>,
    depth: usize,
    leaf_depth: &mut Option<usize>,
    max: usize,
    min: usize,
    is_root: bool,
) -> Result<usize, String> {
    let size = match node {
        Node::Leaf(e) => e.len(),
        Node::Internal(c) => c.len(),
    };
    if size > max {
        return Err(format!("node at depth {depth} has {size} > {max} entries"));
    }
    if !is_root && size < min {
        return Err(format!("node at depth {depth} has {size} < {min} entries"));
    }
    if let (Some(b), Some(r)) = (bound, node_rect(node)) {
        if *b != r {
            return Err(format!("stored rect at depth {depth} is not the tight bound of its children"));
        }
    }
    match node {
        Node::Leaf(entries) => {
            match leaf_depth {
                Some(d) if *d != depth => return Err(format!("leaves at depths {d} and {depth}")),
                _ => *leaf_depth = Some(depth),
            }
            if let Some(b) = bound {
                if let Some((r, _)) = entries.iter().find(|(r, _)| !b.contains(r)) {
                    return Err(format!("leaf entry {r:?} escapes its node rect"));
                }
            }
            Ok(entries.len())
        }
        Node::Internal(children) => {
            let mut total = 0;
            for (r, child) in children {
                if let Some(b) = bound {
                    if !b.contains(r) {
                        return Err(format!("child rect {r:?} escapes its parent"));
                    }
                }
                total += validate_node(child, Some(r), depth + 1, leaf_depth, max, min, false)?;
            }
            Ok(total)
        }
    }
}

fn node_rect<T>(node: &Node<T>) -> Option<Rect> {
    match node {
        Node::Leaf(e) => bounding(e.iter().map(|(r, _)| r)),
        Node::Internal(c) => bounding(c.iter().map(|(r, _)| r)),
    }
}

fn bounding<'a>(mut rects: impl Iterator<Item = &'a Rect>) -> Option<Rect> {
    let first = *rects.next()?;
    Some(rects.fold(first, |acc, r| acc.union(r)))
}

fn insert_rec<T: Copy>(node: &mut Node<T>, rect: Rect, item: T, max: usize, min: usize) -> Option<Node<T>> {
    match node {
        Node::Leaf(entries) => {
            entries.push((rect, item));
            if entries.len() > max {
                let (a, b) = quadratic_split(std::mem::take(entries), min);
                *entries = a;
                return Some(Node::Leaf(b));
            }
            None
        }
        Node::Internal(children) => {
            let idx = choose_subtree(children, &rect);
            let split = insert_rec(&mut children[idx].1, rect, item, max, min);
            children[idx].0 = node_rect(&children[idx].1).expect("child is non-empty");
            if let Some(sibling) = split {
                let r = node_rect(&sibling).expect("split node is non-empty");
                children.push((r, Box::new(sibling)));
                if children.len() > max {
                    let (a, b) = quadratic_split(std::mem::take(children), min);
                    *children = a;
                    return Some(Node::Internal(b));
                }
            }
            None
        }
    }
}

/// Least area enlargement, ties broken by smaller area.
fn choose_subtree<C>(children: &[(Rect, C)], rect: &Rect) -> usize {
    let mut best = 0;
    let mut best_key = (f64::INFINITY, f64::INFINITY);
    for (i, (r, _)) in children.iter().enumerate() {
        let key = (r.enlargement(rect), r.area());
        if key < best_key {
            best_key = key;
            best = i;
        }
    }
    best
}

fn quadratic_split<E: Entry>(mut entries: Vec<E>, min: usize) -> (Vec<E>, Vec<E>) {
    // seeds: the pair wasting the most area when grouped together
    let (mut s1, mut s2, mut worst) = (0, 1, f64::NEG_INFINITY);
    for i in 0..entries.len() {
        for j in i + 1..entries.len() {
            let (a, b) = (entries[i].rect(), entries[j].rect());
            let d = a.union(b).area() - a.area() - b.area();
            if d > worst {
                (s1, s2, worst) = (i, j, d);
            }
        }
    }
    let second = entries.swap_remove(s2);
    let first = entries.swap_remove(s1);
    let (mut r1, mut r2) = (*first.rect(), *second.rect());
    let mut g1 = vec![first];
    let mut g2 = vec![second];
    while !entries.is_empty() {
        if g1.len() + entries.len() == min {
            for e in entries.drain(..) {
                r1 = r1.union(e.rect());
                g1.push(e);
            }
            break;
        }
        if g2.len() + entries.len() == min {
            for e in entries.drain(..) {
                r2 = r2.union(e.rect());
                g2.push(e);
            }
            break;
        }
        // next: the entry with the strongest preference for one group
        let (mut pick, mut best) = (0, f64::NEG_INFINITY);
        for (i, e) in entries.iter().enumerate() {
            let diff = (r1.enlargement(e.rect()) - r2.enlargement(e.rect())).abs();
            if diff > best {
                (pick, best) = (i, diff);
            }
        }
        let e = entries.swap_remove(pick);
        let (d1, d2) = (r1.enlargement(e.rect()), r2.enlargement(e.rect()));
        let to_first = if d1 != d2 {
            d1 < d2
        } else if r1.area() != r2.area() {
            r1.area() < r2.area()
        } else {
            g1.len() <= g2.len()
        };
        if to_first {
            r1 = r1.union(e.rect());
            g1.push(e);
        } else {
            r2 = r2.union(e.rect());
            g2.push(e);
        }
    }
    (g1, g2)
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn random_points(n: usize, seed: u64) -> Vec<(f64, f64)> {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        (0..n).map(|_| (rng.random_range(0.0..1000.0), rng.random_range(0.0..1000.0))).collect()
    }

    #[test]
    fn invariants_hold_after_every_insert() {
        let mut tree = RTree::default();
        for (i, (x, y)) in random_points(600, 7).into_iter().enumerate() {
            tree.insert(Rect::point(x, y), i);
            tree.validate().unwrap_or_else(|e| panic!("after insert {i}: {e}"));
        }
        assert_eq!(tree.len(), 600);
        assert!(tree.depth() >= 2);
    }

    #[test]
    fn search_equals_linear_scan() {
        let pts = random_points(3000, 11);
        let mut tree = RTree::default();
        pts.iter().enumerate().for_each(|(i, &(x, y))| tree.insert(Rect::point(x, y), i));
        let mut rng = ChaCha8Rng::seed_from_u64(12);
        for _ in 0..50 {
            let (x, y) = (rng.random_range(-50.0..1000.0), rng.random_range(-50.0..1000.0));
            let q = Rect { min_x: x, min_y: y, max_x: x + rng.random_range(0.0..300.0), max_y: y + rng.random_range(0.0..300.0) };
            let mut got = tree.search(&q);
            got.sort_unstable();
            let want: Vec<usize> = pts
                .iter()
                .enumerate()
                .filter(|(_, &(x, y))| q.intersects(&Rect::point(x, y)))
                .map(|(i, _)| i)
                .collect();
            assert_eq!(got, want);
        }
    }

    #[test]
    fn duplicate_points_still_split() {
        let mut tree = RTree::default();
        for i in 0..200 {
            tree.insert(Rect::point(1.0, 1.0), i);
        }
        tree.validate().unwrap();
        assert_eq!(tree.search(&Rect::point(1.0, 1.0)).len(), 200);
    }

    #[test]
    fn empty_tree() {
        let tree: RTree<u32> = RTree::default();
        assert!(tree.is_empty());
        assert!(tree.search(&Rect::point(0.0, 0.0)).is_empty());
        tree.validate().unwrap();
    }
}
