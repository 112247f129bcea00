//! The pipeline instantiated at `f32`, compared against the `f64` run.

use lvam_core::amm::Phase;
use lvam_core::detectors::{OracleDetector, ProfileDetector};
use lvam_core::phantom::{generate_phantom, PhantomConfig};
use lvam_core::pipeline::{run_auto, FixedContour, PipelineConfig};

#[test]
fn f32_pipeline_tracks_f64() {
    let (study64, truth64) = generate_phantom(&PhantomConfig::<f64>::default()).unwrap();
    let (study32, truth32) = generate_phantom(&PhantomConfig::<f32>::default()).unwrap();
    for phase in Phase::ALL {
        let src64 = FixedContour {
            id: "truth".into(),
            ed: Some(truth64.contour_ed.clone()),
            es: Some(truth64.contour_es.clone()),
        };
        let src32 = FixedContour {
            id: "truth".into(),
            ed: Some(truth32.contour_ed.clone()),
            es: Some(truth32.contour_es.clone()),
        };
        let r64 = run_auto(&study64, phase, &src64, &OracleDetector::new(&truth64, 0.0, 0), &PipelineConfig::default())
            .unwrap();
        let r32 = run_auto(&study32, phase, &src32, &OracleDetector::new(&truth32, 0.0, 0), &PipelineConfig::default())
            .unwrap();
        for (a, b) in r64.measurements.lengths().iter().zip(r32.measurements.lengths()) {
            assert!((a - f64::from(b)).abs() < 1e-3, "{phase}: {a} vs {b}");
        }

        let p64 = run_auto(&study64, phase, &src64, &ProfileDetector::default(), &PipelineConfig::default()).unwrap();
        let p32 = run_auto(&study32, phase, &src32, &ProfileDetector::default(), &PipelineConfig::default()).unwrap();
        for (a, b) in p64.detection.positions.iter().zip(p32.detection.positions) {
            assert!((a - f64::from(b)).abs() < 1e-2, "{phase}: row {a} vs {b}");
        }
    }
}
