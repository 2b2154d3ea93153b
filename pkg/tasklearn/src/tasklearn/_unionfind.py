class UnionFind:
    """Disjoint sets over an arbitrary collection of hashable elements.

    Roots are chosen deterministically: when two sets of equal rank are joined, the root that comes first in the
    original element order wins. This keeps every quotient built from it reproducible.
    """

    def __init__(self, elements):
        elements = list(elements)
        self._order = {element: index for index, element in enumerate(elements)}
        self.parent = {element: element for element in elements}
        self.rank = {element: 0 for element in elements}
        self.num_sets = len(elements)

    def find(self, x):
        root = x
        while self.parent[root] != root:
            root = self.parent[root]
        # path compression
        while self.parent[x] != root:
            self.parent[x], x = root, self.parent[x]
        return root

    def union(self, x, y):
        """Joins the sets containing x and y. Returns True if they were previously disjoint."""
        x_root = self.find(x)
        y_root = self.find(y)
        if x_root == y_root:
            return False
        if self.rank[x_root] < self.rank[y_root] or (self.rank[x_root] == self.rank[y_root] and
                                                     self._order[y_root] < self._order[x_root]):
            x_root, y_root = y_root, x_root
        self.parent[y_root] = x_root
        if self.rank[x_root] == self.rank[y_root]:
            self.rank[x_root] += 1
        self.num_sets -= 1
        return True

    def is_same(self, x, y):
        return self.find(x) == self.find(y)

    def classes(self):
        """Returns the sets as a list of lists, each sorted by element order, sorted by their first element."""
        out = {}
        for element in self._order:
            out.setdefault(self.find(element), []).append(element)
        return sorted(out.values(), key=lambda members: self._order[members[0]])

    def __repr__(self):
        return "UnionFind(num_sets={})".format(self.num_sets)
