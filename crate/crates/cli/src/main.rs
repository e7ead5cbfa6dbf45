use std::fs;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{ArgGroup, Parser, Subcommand};

use causalstruct::config::{load_config, PipelineConfig};
use causalstruct::edit::{apply_edit, edit_truth, EditCommand};
use causalstruct::grammar::parse_prompt;
use causalstruct::graph::{decode_scene, CausalSceneGraph};
use causalstruct::layout::{assemble_fscene, encode_fscene, render_view, LayoutScene, Viewpoint};
use causalstruct::oracle::{Backend, DeterministicOracle, Oracle};
use causalstruct::pipeline::{
    layout_graph, make_oracle, refine_graph, run_pipeline, write_artifacts, write_failure, Artifacts,
    PipelineError, Stage, SCENE_FILE,
};
use causalstruct::Error;

#[derive(Parser)]
#[command(name = "causalstruct", version, about = "Causal scene-graph layout")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Build, screen and lay out a scene from a prompt.
    #[command(group(ArgGroup::new("input").required(true).args(["prompt", "prompt_file"])))]
    Generate {
        #[arg(short, long)]
        prompt: Option<String>,
        /// Read the prompt from a file.
        #[arg(long)]
        prompt_file: Option<PathBuf>,
        #[arg(short, long)]
        config: Option<PathBuf>,
        #[arg(short, long)]
        output: Option<PathBuf>,
    },
    /// Re-screen and lay out an existing scene file.
    Refine {
        scene: PathBuf,
        #[arg(short, long)]
        config: Option<PathBuf>,
        #[arg(short, long)]
        output: Option<PathBuf>,
    },
    /// Lay out a graph as given, without screening its edges.
    Layout {
        graph: PathBuf,
        #[arg(short, long)]
        config: Option<PathBuf>,
        #[arg(short, long)]
        output: Option<PathBuf>,
    },
    /// Apply one edit to a finished scene.
    #[command(group(ArgGroup::new("edit").required(true).args(["add", "remove", "move_to", "rescale"])))]
    Edit {
        scene: PathBuf,
        /// NAME,L,W,H,RELATION,TARGET[,ASSET]
        #[arg(long)]
        add: Option<String>,
        /// ID
        #[arg(long)]
        remove: Option<String>,
        /// ID,RELATION,TARGET
        #[arg(long = "move")]
        move_to: Option<String>,
        /// ID,FACTOR
        #[arg(long)]
        rescale: Option<String>,
        #[arg(short, long)]
        config: Option<PathBuf>,
        /// Output directory; defaults to the scene file's directory.
        #[arg(short, long)]
        output: Option<PathBuf>,
    },
    /// Render a scene file to SVG.
    Render {
        scene: PathBuf,
        #[arg(long, default_value = "threequarter")]
        view: Viewpoint,
        #[arg(long, default_value_t = 512)]
        width: u32,
        #[arg(long, default_value_t = 512)]
        height: u32,
        /// Write here instead of standard output.
        #[arg(short, long)]
        output: Option<PathBuf>,
    },
    /// Print the layout record of a scene file.
    Export {
        scene: PathBuf,
        #[arg(long, required = true)]
        fscene: bool,
        #[arg(short, long)]
        output: Option<PathBuf>,
    },
}

enum Failure {
    Plain(Error),
    Stage(PipelineError),
}

impl From<Error> for Failure {
    fn from(e: Error) -> Self {
        Failure::Plain(e)
    }
}

impl From<std::io::Error> for Failure {
    fn from(e: std::io::Error) -> Self {
        Failure::Plain(e.into())
    }
}

fn config_for(path: Option<&Path>, output: Option<PathBuf>) -> Result<PipelineConfig, Error> {
    let mut config = match path {
        Some(p) => load_config(p)?,
        None => PipelineConfig::default(),
    };
    if let Some(o) = output {
        config.output_dir = o;
    }
    Ok(config)
}

fn read_scene(path: &Path) -> Result<CausalSceneGraph, Error> {
    decode_scene(&fs::read_to_string(path)?)
}

fn finish(config: &PipelineConfig, result: Result<Artifacts, PipelineError>) -> Result<(), Failure> {
    match result {
        Ok(a) => {
            write_artifacts(&config.output_dir, &a)?;
            for d in &a.scene.diagnostics {
                eprintln!("note: {d}");
            }
            println!("{}", config.output_dir.display());
            Ok(())
        }
        Err(e) => {
            write_failure(&config.output_dir, &e)?;
            Err(Failure::Stage(e))
        }
    }
}

fn write_or_print(output: Option<&Path>, text: &str) -> Result<(), Failure> {
    match output {
        Some(p) => fs::write(p, text)?,
        None => print!("{text}"),
    }
    Ok(())
}

fn run(cli: Cli) -> Result<(), Failure> {
    match cli.command {
        Command::Generate {
            prompt,
            prompt_file,
            config,
            output,
        } => {
            let prompt = match (prompt, prompt_file) {
                (Some(p), _) => p,
                (None, Some(f)) => fs::read_to_string(f)?,
                (None, None) => unreachable!("clap requires one of them"),
            };
            let config = config_for(config.as_deref(), output)?;
            let result = match make_oracle(&config, Some(&prompt), None) {
                Ok(oracle) => run_pipeline(&config, &prompt, oracle.as_ref()),
                Err(error) => Err(PipelineError {
                    stage: Stage::Parse,
                    error,
                    graph: None,
                    traces: Vec::new(),
                }),
            };
            finish(&config, result)
        }
        Command::Refine { scene, config, output } => {
            let graph = read_scene(&scene)?;
            let config = config_for(config.as_deref(), output)?;
            let prompt = Some(graph.meta().prompt.as_str()).filter(|p| parse_prompt(p).is_ok());
            let oracle = make_oracle(&config, prompt, Some(&graph))?;
            finish(&config, refine_graph(&config, &graph, oracle.as_ref()))
        }
        Command::Layout { graph, config, output } => {
            let graph = read_scene(&graph)?;
            let config = config_for(config.as_deref(), output)?;
            let oracle = make_oracle(&config, None, Some(&graph))?;
            finish(&config, layout_graph(&config, &graph, oracle.as_ref()))
        }
        Command::Edit {
            scene,
            add,
            remove,
            move_to,
            rescale,
            config,
            output,
        } => {
            let graph = read_scene(&scene)?;
            let output = output.or_else(|| scene.parent().map(Path::to_path_buf));
            let config = config_for(config.as_deref(), output)?;
            let cmd = match (add, remove, move_to, rescale) {
                (Some(a), ..) => EditCommand::parse_add(&graph, &a)?,
                (_, Some(r), ..) => EditCommand::Remove(r.trim().into()),
                (_, _, Some(m), _) => EditCommand::parse_move(&m)?,
                (_, _, _, Some(s)) => EditCommand::parse_rescale(&s)?,
                _ => unreachable!("clap requires one edit"),
            };
            let oracle: Box<dyn Oracle> = match &config.oracle.backend {
                Backend::Deterministic { truth: None } => {
                    Box::new(DeterministicOracle::new(edit_truth(&graph, &cmd)).with_gap(config.layout.gap))
                }
                _ => make_oracle(&config, None, Some(&graph))?,
            };
            let out = apply_edit(&graph, &cmd, &config, oracle.as_ref())?;
            write_artifacts(&config.output_dir, &out.artifacts)?;
            println!("{}", config.output_dir.join(SCENE_FILE).display());
            Ok(())
        }
        Command::Render {
            scene,
            view,
            width,
            height,
            output,
        } => {
            let layout = LayoutScene::from_graph(&read_scene(&scene)?)?;
            let r = render_view(&layout, view, (width, height))?;
            write_or_print(output.as_deref(), &r.document)
        }
        Command::Export { scene, output, .. } => {
            let layout = LayoutScene::from_graph(&read_scene(&scene)?)?;
            write_or_print(output.as_deref(), &encode_fscene(&assemble_fscene(&layout)))
        }
    }
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            // usage errors are validation failures; help and version are not errors
            return if e.use_stderr() { ExitCode::from(3) } else { ExitCode::SUCCESS };
        }
    };
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(Failure::Plain(e)) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
        Err(Failure::Stage(e)) => {
            eprintln!("error: {e}");
            ExitCode::from(e.error.exit_code() as u8)
        }
    }
}
