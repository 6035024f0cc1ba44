use crate::model::graph::RcmGraph;

struct UnionFind {
    parent: Vec<u32>,
    rank: Vec<u8>,
}

impl UnionFind {
    fn new(n: usize) -> Self {
        UnionFind {
            parent: (0..n as u32).collect(),
            rank: vec![0; n],
        }
    }

    fn find(&mut self, mut x: u32) -> u32 {
        while self.parent[x as usize] != x {
            let p = self.parent[x as usize];
            self.parent[x as usize] = self.parent[p as usize];
            x = p;
        }
        x
    }

    fn union(&mut self, a: u32, b: u32) {
        let (ra, rb) = (self.find(a), self.find(b));
        if ra == rb {
            return;
        }
        match self.rank[ra as usize].cmp(&self.rank[rb as usize]) {
            std::cmp::Ordering::Less => self.parent[ra as usize] = rb,
            std::cmp::Ordering::Greater => self.parent[rb as usize] = ra,
            std::cmp::Ordering::Equal => {
                self.parent[rb as usize] = ra;
                self.rank[ra as usize] += 1;
            }
        }
    }
}

/// Connected components of a graph. Components are numbered in order of
/// their smallest vertex index, which is their lexicographic minimum since
/// point sets are kept sorted.
#[derive(Clone, Debug)]
pub struct Components {
    label: Vec<u32>,
    starts: Vec<usize>,
    members: Vec<u32>,
}

impl Components {
    pub fn of(graph: &RcmGraph) -> Self {
        let n = graph.len();
        let mut uf = UnionFind::new(n);
        for (i, j) in graph.edges() {
            uf.union(i as u32, j as u32);
        }
        let mut root_label = vec![u32::MAX; n];
        let mut label = vec![0u32; n];
        let mut count = 0u32;
        for v in 0..n {
            let r = uf.find(v as u32) as usize;
            if root_label[r] == u32::MAX {
                root_label[r] = count;
                count += 1;
            }
            label[v] = root_label[r];
        }
        let mut starts = vec![0usize; count as usize + 1];
        for &l in &label {
            starts[l as usize + 1] += 1;
        }
        for c in 0..count as usize {
            starts[c + 1] += starts[c];
        }
        let mut fill = starts.clone();
        let mut members = vec![0u32; n];
        for (v, &l) in label.iter().enumerate() {
            members[fill[l as usize]] = v as u32;
            fill[l as usize] += 1;
        }
        Components { label, starts, members }
    }

    pub fn count(&self) -> usize {
        self.starts.len() - 1
    }

    #[inline]
    pub fn label(&self, v: usize) -> usize {
        self.label[v] as usize
    }

    /// Vertex indices of component `c`, ascending.
    #[inline]
    pub fn members(&self, c: usize) -> &[u32] {
        &self.members[self.starts[c]..self.starts[c + 1]]
    }

    pub fn iter(&self) -> impl Iterator<Item = &[u32]> {
        (0..self.count()).map(move |c| self.members(c))
    }
}

/// The partition of point ids into connected components.
pub fn components(graph: &RcmGraph) -> Vec<Vec<i64>> {
    let comps = Components::of(graph);
    comps
        .iter()
        .map(|m| m.iter().map(|&v| graph.points().id(v as usize)).collect())
        .collect()
}
