use super::{
    Coord, LeafNode, Level1Node, Level2Node, RootEntry, TreeNode, VdbGrid, LEAF_DIM, LEVEL1_DIM,
    LEVEL2_DIM,
};

/// Lookup cursor that remembers the last node visited at every level and
/// starts the next query from the lowest cached node containing it.
///
/// One accessor per reader; the grid itself may be shared.
#[derive(Debug, Clone)]
pub struct Accessor<'a> {
    grid: &'a VdbGrid,
    leaf: Option<&'a LeafNode>,
    level1: Option<&'a Level1Node>,
    level2: Option<&'a Level2Node>,
}

impl<'a> Accessor<'a> {
    pub fn new(grid: &'a VdbGrid) -> Self {
        Accessor {
            grid,
            leaf: None,
            level1: None,
            level2: None,
        }
    }

    pub fn grid(&self) -> &'a VdbGrid {
        self.grid
    }

    pub fn get_value(&mut self, c: Coord) -> (f32, bool) {
        if let Some(leaf) = self.leaf {
            if leaf.origin() == c.align(LEAF_DIM) {
                return leaf.probe(c);
            }
        }
        if let Some(n1) = self.level1 {
            if n1.origin() == c.align(LEVEL1_DIM) {
                return self.from_level1(n1, c);
            }
        }
        if let Some(n2) = self.level2 {
            if n2.origin() == c.align(LEVEL2_DIM) {
                return self.from_level2(n2, c);
            }
        }
        match self.grid.root.get(&c.align(LEVEL2_DIM)) {
            None => (self.grid.background, false),
            Some(RootEntry::Tile { value, active }) => (*value, *active),
            Some(RootEntry::Child(n2)) => {
                self.level2 = Some(n2);
                self.from_level2(n2, c)
            }
        }
    }

    pub fn is_active(&mut self, c: Coord) -> bool {
        self.get_value(c).1
    }

    /// The leaf containing `c`, if any.
    pub fn leaf(&mut self, c: Coord) -> Option<&'a LeafNode> {
        self.get_value(c);
        self.leaf.filter(|l| l.origin() == c.align(LEAF_DIM))
    }

    fn from_level2(&mut self, n2: &'a Level2Node, c: Coord) -> (f32, bool) {
        let idx = Level2Node::slot_of(c);
        match n2.child(idx) {
            Some(n1) => {
                self.level1 = Some(n1);
                self.from_level1(n1, c)
            }
            None => (n2.tile_value(idx), n2.active_mask().get(idx)),
        }
    }

    fn from_level1(&mut self, n1: &'a Level1Node, c: Coord) -> (f32, bool) {
        let idx = Level1Node::slot_of(c);
        match n1.child(idx) {
            Some(leaf) => {
                self.leaf = Some(leaf);
                leaf.probe(c)
            }
            None => (n1.tile_value(idx), n1.active_mask().get(idx)),
        }
    }
}
