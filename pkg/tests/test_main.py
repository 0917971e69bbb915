import unittest
from unittest.mock import patch, MagicMock

import pandas as pd

from vibracav.commands import CommandResult, CommandRunner
from vibracav.config import SweepRequest
from vibracav.errors import InputError
from vibracav.main import main


def _result(passed=True):
    frame = pd.DataFrame({"kappa": [0.0, 0.5], "u1": [0.5, 0.3]})
    return CommandResult("figure1", frame, {"p": 2}, passed=passed)


class TestMain(unittest.TestCase):

    @patch('vibracav.main.display_banner')
    @patch('vibracav.main.display_help')
    def test_help_command(self, mock_display_help, mock_display_banner):
        """Test that help command works correctly"""
        result = main(['program_name', '--help'], exit_fn=MagicMock())

        mock_display_banner.assert_called_once()
        mock_display_help.assert_called_once()
        self.assertEqual(result, 0)

    @patch('vibracav.main.display_banner')
    @patch('vibracav.main.display_help')
    def test_no_command_shows_help(self, mock_display_help, mock_display_banner):
        result = main(['program_name'], exit_fn=MagicMock())

        mock_display_help.assert_called_once()
        self.assertEqual(result, 0)

    @patch('vibracav.main.display_banner')
    @patch('vibracav.main.load_config')
    @patch('vibracav.main.print_table')
    @patch.object(CommandRunner, 'run')
    def test_successful_execution(self, mock_run, mock_print_table, mock_load_config, mock_display_banner):
        """Test successful execution path"""
        request = SweepRequest(command="figure1")
        mock_load_config.return_value = request
        mock_run.return_value = _result()

        result = main(['program_name', 'figure1'], exit_fn=MagicMock())

        mock_display_banner.assert_called_once()
        mock_load_config.assert_called_once_with(['figure1'])
        mock_run.assert_called_once_with(request)
        mock_print_table.assert_called_once()
        self.assertEqual(result, 0)

    @patch('vibracav.main.display_banner')
    @patch('vibracav.main.load_config')
    @patch('vibracav.main.write_table')
    @patch.object(CommandRunner, 'run')
    def test_output_file_is_written(self, mock_run, mock_write_table, mock_load_config, mock_display_banner):
        request = SweepRequest(command="figure1", out="figure1.json", output_format="json")
        mock_load_config.return_value = request
        mock_run.return_value = _result()
        mock_write_table.return_value = "figure1.json"

        with patch('vibracav.main.console.print'):
            result = main(['program_name', 'figure1', '--out', 'figure1.json'], exit_fn=MagicMock())

        self.assertEqual(result, 0)
        args = mock_write_table.call_args[0]
        self.assertEqual(args[3], "figure1.json")
        self.assertEqual(args[4], "json")

    @patch('vibracav.main.display_banner')
    @patch('vibracav.main.load_config')
    @patch('vibracav.main.print_table')
    @patch.object(CommandRunner, 'run')
    def test_failed_audit_returns_error_code(self, mock_run, mock_print_table, mock_load_config,
                                             mock_display_banner):
        mock_load_config.return_value = SweepRequest(command="audit")
        mock_run.return_value = _result(passed=False)

        with patch('vibracav.main.console.print'):
            result = main(['program_name', 'audit'], exit_fn=MagicMock())

        self.assertEqual(result, 1)

    @patch('vibracav.main.display_banner')
    def test_invalid_command_uses_exit_fn(self, mock_display_banner):
        exit_fn = MagicMock()

        result = main(['program_name', 'not-a-command'], exit_fn=exit_fn)

        exit_fn.assert_called_once_with(2)
        self.assertEqual(result, 2)

    @patch('vibracav.main.display_banner')
    @patch('vibracav.main.load_config')
    @patch('vibracav.main.logger.exception')
    @patch('vibracav.main.console.print')
    def test_package_error_prints_diagnostics(self, mock_print, mock_logger, mock_load_config,
                                              mock_display_banner):
        mock_load_config.side_effect = InputError("bad range", {"spec": "1:2"})

        result = main(['program_name', 'coeffs'], exit_fn=MagicMock())

        self.assertEqual(result, 1)
        mock_logger.assert_called_once()
        mock_print.assert_any_call("[red]Error: bad range[/red]")
        mock_print.assert_called_with("  [yellow]spec[/yellow]: 1:2")

    @patch('vibracav.main.display_banner')
    @patch('vibracav.main.load_config')
    @patch('vibracav.main.console.print')
    def test_keyboard_interrupt(self, mock_print, mock_load_config, mock_display_banner):
        """Test handling of keyboard interrupt"""
        mock_load_config.side_effect = KeyboardInterrupt()

        result = main(['program_name', 'coeffs'], exit_fn=MagicMock())

        mock_display_banner.assert_called_once()
        self.assertEqual(result, 0)
        mock_print.assert_called_with("\n[yellow]Program terminated by user.[/yellow]")

    @patch('vibracav.main.display_banner')
    @patch('vibracav.main.load_config')
    @patch('vibracav.main.logger.exception')
    @patch('vibracav.main.console.print')
    def test_unexpected_exception(self, mock_print, mock_logger, mock_load_config, mock_display_banner):
        """Test handling of unexpected exceptions"""
        mock_load_config.side_effect = RuntimeError("Test error")

        result = main(['program_name', 'coeffs'], exit_fn=MagicMock())

        mock_display_banner.assert_called_once()
        self.assertEqual(result, 1)
        mock_logger.assert_called_once()
        mock_print.assert_called_with("[red]Error: Test error[/red]")


if __name__ == '__main__':
    unittest.main()
