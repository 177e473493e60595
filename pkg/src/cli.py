import sys
import json
import logging
import os
import shlex
from dataclasses import dataclass
from typing import Any, Callable, Dict, List, Optional
from pathlib import Path
from prompt_toolkit import PromptSession
from prompt_toolkit.completion import WordCompleter
from prompt_toolkit.styles import Style
from prompt_toolkit.formatted_text import HTML
from prompt_toolkit.history import FileHistory
from src.ablation_handler import list_ablations
from src.config import ConfigError, ExperimentConfig, experiment_path, parse_assignments, parse_config
from src.constants import EXPERIMENTS_DIR, GENERAL_CONFIG
from src.harness import ablation_cmd, compare_cmd, inspect_cmd, list_scenarios_cmd, partition_cmd, run_cmd
from src.helpers import print_h_bar
from src.strategy_manager import list_strategies

# Configure logging
logging.basicConfig(level=logging.INFO, format='%(message)s')
logger = logging.getLogger("cli")

@dataclass
class Command:
    """Dataclass to represent a CLI command"""
    name: str
    description: str
    tips: List[str]
    handler: Callable
    aliases: List[str] = None

    def __post_init__(self):
        if self.aliases is None:
            self.aliases = []

class FedTierCLI:
    def __init__(self):
        self.experiment_name: Optional[str] = None
        self.overrides: Dict[str, Any] = {}
        self.config: Optional[ExperimentConfig] = None

        # Create config directory if it doesn't exist
        self.config_dir = Path.home() / '.fedtier'
        self.config_dir.mkdir(exist_ok=True)

        # Initialize command registry
        self._initialize_commands()

        # Setup prompt toolkit components
        self._setup_prompt_toolkit()

    def _initialize_commands(self) -> None:
        """Initialize all CLI commands"""
        self.commands: Dict[str, Command] = {}

        # Help command
        self._register_command(
            Command(
                name="help",
                description="Displays a list of all available commands, or help for a specific command.",
                tips=["Try 'help' to see available commands.",
                      "Try 'help {command}' to get more information about a specific command."],
                handler=self.help,
                aliases=['h', '?']
            )
        )

        # Clear command
        self._register_command(
            Command(
                name="clear",
                description="Clears the terminal screen.",
                tips=["Use this command to clean up your terminal view"],
                handler=self.clear_screen,
                aliases=['cls']
            )
        )

        ################## EXPERIMENTS ##################
        self._register_command(
            Command(
                name="run",
                description="Runs the loaded experiment on every configured seed.",
                tips=["Format: run [section.field=value ...]",
                      "Overrides given here apply to this run only"],
                handler=self.run,
                aliases=['start']
            )
        )

        self._register_command(
            Command(
                name="compare",
                description="Runs several strategies on identical data and seeds.",
                tips=["Format: compare [strategy ...]",
                      "Without arguments every strategy is compared",
                      "Use 'list-strategies' to see available strategies"],
                handler=self.compare,
                aliases=['cmp']
            )
        )

        self._register_command(
            Command(
                name="ablate",
                description="Sweeps one ablation axis of the loaded experiment.",
                tips=[f"Format: ablate {{axis}}, axis one of: {', '.join(list_ablations())}"],
                handler=self.ablate,
                aliases=['ablation']
            )
        )

        self._register_command(
            Command(
                name="inspect",
                description="Pretty-prints a per-iteration splits CSV.",
                tips=["Format: inspect {path/to/splits_<seed>.csv}"],
                handler=self.inspect,
                aliases=['show-splits']
            )
        )

        self._register_command(
            Command(
                name="partition",
                description="Writes the per-client partition summary for one seed.",
                tips=["Format: partition [seed] [path]"],
                handler=self.partition,
                aliases=['data']
            )
        )

        self._register_command(
            Command(
                name="list-experiments",
                description="Lists all experiment configs you have on file.",
                tips=[f"Experiments are stored in the '{EXPERIMENTS_DIR}' directory",
                      "Use 'load-experiment' to load an available experiment"],
                handler=self.list_experiments,
                aliases=['experiments', 'ls']
            )
        )

        self._register_command(
            Command(
                name="load-experiment",
                description="Loads an experiment config from a file.",
                tips=["Format: load-experiment {experiment_name}",
                      "Use 'list-experiments' to see available experiments"],
                handler=self.load_experiment,
                aliases=['load']
            )
        )

        self._register_command(
            Command(
                name="set-default-experiment",
                description="Define which experiment is loaded when the CLI starts.",
                tips=[f"You can also just change the 'default_experiment' field in {EXPERIMENTS_DIR}/{GENERAL_CONFIG}"],
                handler=self.set_default_experiment,
                aliases=['default']
            )
        )

        self._register_command(
            Command(
                name="set",
                description="Overrides config fields of the loaded experiment for this session.",
                tips=["Format: set section.field=value [...]",
                      "Example: set federation.eta=3 selection.quartile_range=full",
                      "Use 'reset' to drop all session overrides"],
                handler=self.set_overrides,
            )
        )

        self._register_command(
            Command(
                name="reset",
                description="Drops all session overrides.",
                tips=[],
                handler=self.reset_overrides,
            )
        )

        self._register_command(
            Command(
                name="show-config",
                description="Prints the fully resolved config of the loaded experiment.",
                tips=["Defaults, scenario presets and overrides are all applied"],
                handler=self.show_config,
                aliases=['config']
            )
        )

        self._register_command(
            Command(
                name="list-strategies",
                description="Lists the available client selection strategies.",
                tips=[],
                handler=self.list_strategies,
                aliases=['strategies']
            )
        )

        self._register_command(
            Command(
                name="list-scenarios",
                description="Lists the label-skew scenario presets.",
                tips=["Select one with 'set data.scenario={name}'"],
                handler=self.list_scenarios,
                aliases=['scenarios']
            )
        )

        ################## MISC ##################
        # Exit command
        self._register_command(
            Command(
                name="exit",
                description="Exits the FedTier CLI.",
                tips=["You can also use Ctrl+D to exit"],
                handler=self.exit,
                aliases=['quit', 'q']
            )
        )

    def _setup_prompt_toolkit(self) -> None:
        """Setup prompt toolkit components"""
        self.style = Style.from_dict({
            'prompt': 'ansicyan bold',
            'command': 'ansigreen',
            'error': 'ansired bold',
            'success': 'ansigreen bold',
            'warning': 'ansiyellow',
        })

        # Use FileHistory for persistent command history
        history_file = self.config_dir / 'history.txt'

        self.completer = WordCompleter(
            list(self.commands.keys()),
            ignore_case=True,
            sentence=True
        )

        self.session = PromptSession(
            completer=self.completer,
            style=self.style,
            history=FileHistory(str(history_file))
        )

    ###################
    # Helper Functions
    ###################
    def _register_command(self, command: Command) -> None:
        """Register a command and its aliases"""
        self.commands[command.name] = command
        for alias in command.aliases:
            self.commands[alias] = command

    def _get_prompt_message(self) -> HTML:
        """Generate the prompt message based on current state"""
        status = f"({self.experiment_name})" if self.experiment_name else "(no experiment)"
        if self.overrides:
            status += f" +{len(self.overrides)}"
        return HTML(f'<prompt>FedTier-CLI</prompt> {status} > ')

    def _handle_command(self, input_string: str) -> None:
        """Parse and handle a command input"""
        try:
            input_list = shlex.split(input_string)
        except ValueError as e:
            logger.error(f"Error parsing command: {e}")
            return

        command_string = input_list[0].lower()

        try:
            command = self.commands.get(command_string)
            if command:
                command.handler(input_list)
            else:
                self._handle_unknown_command(command_string)
        except Exception as e:
            logger.error(f"Error executing command: {e}")

    def _handle_unknown_command(self, command: str) -> None:
        """Handle unknown command with suggestions"""
        logger.warning(f"Unknown command: '{command}'")

        # Suggest similar commands using basic string similarity
        suggestions = self._get_command_suggestions(command)
        if suggestions:
            logger.info("Did you mean one of these?")
            for suggestion in suggestions:
                logger.info(f"  - {suggestion}")
        logger.info("Use 'help' to see all available commands.")

    def _get_command_suggestions(self, command: str, max_suggestions: int = 3) -> List[str]:
        """Get command suggestions based on string similarity"""
        from difflib import get_close_matches
        return get_close_matches(command, self.commands.keys(), n=max_suggestions, cutoff=0.6)

    def _print_welcome_message(self, clearing: bool = False) -> None:
        """Print welcome message and initial status

        Args:
            clearing (bool): Whether this is being called during a screen clear
                        When True, skips the final horizontal bar to avoid doubles
        """
        print_h_bar()
        logger.info("Welcome to the FedTier CLI!")
        logger.info("Type 'help' for a list of commands.")
        if not clearing:
            print_h_bar()

    def _show_command_help(self, command_name: str) -> None:
        """Show help for a specific command"""
        command = self.commands.get(command_name)
        if not command:
            logger.warning(f"Unknown command: '{command_name}'")
            suggestions = self._get_command_suggestions(command_name)
            if suggestions:
                logger.info("Did you mean one of these?")
                for suggestion in suggestions:
                    logger.info(f"  - {suggestion}")
            return

        logger.info(f"\nHelp for '{command.name}':")
        logger.info(f"Description: {command.description}")

        if command.aliases:
            logger.info(f"Aliases: {', '.join(command.aliases)}")

        if command.tips:
            logger.info("\nTips:")
            for tip in command.tips:
                logger.info(f"  - {tip}")

    def _show_general_help(self) -> None:
        """Show general help information"""
        logger.info("\nAvailable Commands:")
        # Group commands by first letter
        commands_by_letter = {}
        for cmd_name, cmd in self.commands.items():
            # Only show main commands, not aliases
            if cmd_name == cmd.name:
                commands_by_letter.setdefault(cmd_name[0].upper(), []).append(cmd)

        for letter in sorted(commands_by_letter.keys()):
            logger.info(f"\n{letter}:")
            for cmd in sorted(commands_by_letter[letter], key=lambda x: x.name):
                logger.info(f"  {cmd.name:<24} - {cmd.description}")

    def _resolve_config(self, extra: Optional[Dict[str, Any]] = None) -> Optional[ExperimentConfig]:
        """Loaded experiment plus session overrides plus per-command overrides"""
        if self.experiment_name is None:
            logger.info("No experiment is currently loaded. Use 'load-experiment' to load one.")
            return None
        try:
            return parse_config(experiment_path(self.experiment_name), {**self.overrides, **(extra or {})})
        except ConfigError as e:
            logger.error(str(e))
            return None

    def _load_experiment_from_file(self, experiment_name: str) -> None:
        try:
            self.config = parse_config(experiment_path(experiment_name), self.overrides)
            self.experiment_name = experiment_name
            logger.info(f"\nSuccessfully loaded experiment: {self.config.name} ({self.config.strategy.value})")
        except ConfigError as e:
            logger.error(f"Error loading experiment: {e}")
            logger.info("Use 'list-experiments' to see available experiments.")

    def _load_default_experiment(self) -> None:
        """Load the user's default experiment"""
        general_config_path = Path(EXPERIMENTS_DIR) / GENERAL_CONFIG
        try:
            with open(general_config_path, 'r') as file:
                data = json.load(file)
        except FileNotFoundError:
            logger.error(f"File {GENERAL_CONFIG} not found, please create one.")
            return
        except json.JSONDecodeError:
            logger.error(f"File {general_config_path} contains Invalid JSON format")
            return

        if not data.get('default_experiment'):
            logger.error(f'No default experiment defined, please set one in {GENERAL_CONFIG}')
            return
        self._load_experiment_from_file(data['default_experiment'])

    ###################
    # Command functions
    ###################
    def help(self, input_list: List[str]) -> None:
        """List all commands supported by the CLI"""
        if len(input_list) > 1:
            self._show_command_help(input_list[1])
        else:
            self._show_general_help()

    def clear_screen(self, input_list: List[str]) -> None:
        """Clear the terminal screen"""
        os.system('cls' if os.name == 'nt' else 'clear')
        self._print_welcome_message(clearing=True)

    def run(self, input_list: List[str]) -> None:
        config = self._resolve_config(parse_assignments(input_list[1:]))
        if config is None:
            return
        try:
            run_cmd(config)
        except KeyboardInterrupt:
            logger.info("\nRun stopped by user.")

    def compare(self, input_list: List[str]) -> None:
        config = self._resolve_config()
        if config is None:
            return
        strategies = input_list[1:] or list_strategies()
        try:
            compare_cmd(config, strategies)
        except KeyboardInterrupt:
            logger.info("\nComparison stopped by user.")

    def ablate(self, input_list: List[str]) -> None:
        if len(input_list) < 2:
            logger.info("Please specify an ablation axis.")
            logger.info(f"Available axes: {', '.join(list_ablations())}")
            return
        config = self._resolve_config()
        if config is None:
            return
        try:
            ablation_cmd(input_list[1], config)
        except KeyboardInterrupt:
            logger.info("\nAblation stopped by user.")

    def inspect(self, input_list: List[str]) -> None:
        if len(input_list) < 2:
            logger.info("Please specify a splits CSV.")
            logger.info("Format: inspect {path}")
            return
        inspect_cmd(input_list[1])

    def partition(self, input_list: List[str]) -> None:
        config = self._resolve_config()
        if config is None:
            return
        seed = int(input_list[1]) if len(input_list) > 1 else config.seeds[0]
        path = input_list[2] if len(input_list) > 2 else None
        partition_cmd(config, seed, path)

    def list_experiments(self, input_list: List[str]) -> None:
        """Handle list experiments command"""
        logger.info("\nAvailable Experiments:")
        experiments_dir = Path(EXPERIMENTS_DIR)
        if not experiments_dir.exists():
            logger.info("No experiments directory found.")
            return

        experiments = [p for p in sorted(experiments_dir.glob("*.json")) if p.name != GENERAL_CONFIG]
        if not experiments:
            logger.info(f"No experiments found. Add a JSON config to '{EXPERIMENTS_DIR}'.")
            return
        for experiment_file in experiments:
            logger.info(f"- {experiment_file.stem}")

    def load_experiment(self, input_list: List[str]) -> None:
        """Handle load experiment command"""
        if len(input_list) < 2:
            logger.info("Please specify an experiment name.")
            logger.info("Format: load-experiment {experiment_name}")
            logger.info("Use 'list-experiments' to see available experiments.")
            return

        self._load_experiment_from_file(experiment_name=input_list[1])

    def set_default_experiment(self, input_list: List[str]) -> None:
        """Handle set-default-experiment command"""
        if len(input_list) < 2:
            logger.info("Please specify the name of the experiment file.")
            return

        name = input_list[1]
        # if file does not exist, refuse to set it as default
        if not experiment_path(name).exists():
            logger.error("Experiment file not found.")
            return

        general_config_path = Path(EXPERIMENTS_DIR) / GENERAL_CONFIG
        try:
            with open(general_config_path, 'r') as file:
                data = json.load(file)
        except FileNotFoundError:
            data = {}
        except json.JSONDecodeError:
            logger.error("Invalid JSON format")
            return

        data['default_experiment'] = name
        with open(general_config_path, 'w') as f:
            json.dump(data, f, indent=4)
        logger.info(f"Experiment {name} is now set as default.")

    def set_overrides(self, input_list: List[str]) -> None:
        if len(input_list) < 2:
            logger.info("Format: set section.field=value [...]")
            return
        candidate = {**self.overrides, **parse_assignments(input_list[1:])}
        if self.experiment_name is not None:
            try:
                self.config = parse_config(experiment_path(self.experiment_name), candidate)
            except ConfigError as e:
                logger.error(str(e))
                return
        self.overrides = candidate
        for key in input_list[1:]:
            logger.info(f"  {key}")

    def reset_overrides(self, input_list: List[str]) -> None:
        self.overrides = {}
        logger.info("Session overrides cleared.")
        if self.experiment_name is not None:
            self._load_experiment_from_file(self.experiment_name)

    def show_config(self, input_list: List[str]) -> None:
        config = self._resolve_config()
        if config is not None:
            logger.info(json.dumps(config.model_dump(mode="json"), indent=2))

    def list_strategies(self, input_list: List[str]) -> None:
        logger.info("\nAvailable Strategies:")
        for name in list_strategies():
            logger.info(f"- {name}")

    def list_scenarios(self, input_list: List[str]) -> None:
        list_scenarios_cmd()

    def exit(self, input_list: List[str]) -> None:
        """Exit the CLI gracefully"""
        logger.info("\nGoodbye!")
        sys.exit(0)


    ###################
    # Main CLI Loop
    ###################
    def main_loop(self) -> None:
        """Main CLI loop"""
        self._print_welcome_message()
        self._load_default_experiment()

        # Start CLI loop
        while True:
            try:
                input_string = self.session.prompt(
                    self._get_prompt_message(),
                    style=self.style
                ).strip()

                if not input_string:
                    continue

                self._handle_command(input_string)
                print_h_bar()

            except KeyboardInterrupt:
                continue
            except EOFError:
                self.exit([])
            except Exception as e:
                logger.exception(f"An error occurred: {e}")
