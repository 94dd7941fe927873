//! With relevance off (all-ones weights, no global mixing) and no question
//! node, the graph stack must reduce to a plain R-GCN.

#[test]
fn relevance_off_reduces_to_rgcn() {
    let worst = testkit::rgcn::max_deviation(20, 1000);
    assert!(worst < 1e-6, "max deviation from the R-GCN oracle {worst:e}");
}

#[test]
fn reduction_holds_on_other_graphs() {
    let worst = testkit::rgcn::max_deviation(10, 5000);
    assert!(worst < 1e-6, "max deviation from the R-GCN oracle {worst:e}");
}
